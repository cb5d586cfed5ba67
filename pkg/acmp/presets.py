"""
内置实验预设

每个预设是一组 JSON 形式的实验配置（fig4 含两次运行），取用时经 ExperimentConfig 校验。
预设固定了随机种子，验收测试直接调用预设而不是手写配置。
"""

import copy
from typing import Any

from acmp.errors import ConfigError
from acmp.models import ExperimentConfig

# 两类随机图：100 个节点，同类 0.9、异类 0.1 连边，特征 N(±0.5, 2²)，二维
_SYNTHETIC_GRAPH: dict[str, Any] = {
    "n": 100, "p_in": 0.9, "p_out": 0.1,
    "means": [-0.5, 0.5], "sigma": 2.0, "dim": 2,
}

# 稀疏两类图，特征集中在 ±0.5 附近
_SPARSE_GRAPH: dict[str, Any] = {
    "n": 100, "p_in": 0.1, "p_out": 0.02,
    "means": [-0.5, 0.5], "sigma": 0.1, "dim": 2,
}

PRESETS: dict[str, list[dict[str, Any]]] = {
    "fig2": [{
        "name": "fig2",
        "seed": 7,
        "graph": _SYNTHETIC_GRAPH,
        "model": "acmp-gcn",
        "params": {"alpha": 1.0, "delta": 1.0, "beta": 0.0},
        "solver": {"method": "dopri5", "t_end": 30.0, "sample_every": 1.0},
    }],
    "fig4": [
        {
            "name": "grand",
            "seed": 7,
            "graph": _SYNTHETIC_GRAPH,
            "model": "grand",
            "solver": {"method": "dopri5", "t_end": 30.0, "sample_every": 1.0},
        },
        {
            "name": "acmp-gcn",
            "seed": 7,
            "graph": _SYNTHETIC_GRAPH,
            "model": "acmp-gcn",
            "params": {"alpha": 1.0, "delta": 1.0, "beta": 1.0},
            "solver": {"method": "dopri5", "t_end": 30.0, "sample_every": 1.0},
        },
    ],
    "fig5": [{
        "name": "fig5",
        "seed": 7,
        "graph": _SYNTHETIC_GRAPH,
        "model": "acmp-gcn",
        "params": {"alpha": 1.0, "delta": 1.0, "beta": 0.0},
        "solver": {"method": "dopri5", "t_end": 10.0, "sample_every": 1.0},
        "beta_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
    }],
    "fig6": [{
        "name": "fig6",
        "seed": 11,
        "graph": _SPARSE_GRAPH,
        "model": "acmp-gcn",
        "params": {"alpha": 1.0, "delta": 0.0, "beta": 0.75},
        "solver": {
            "method": "dopri5", "t_end": 10.0, "sample_every": 0.5, "blowup_threshold": 1000.0,
        },
    }],
    "flocking": [{
        "name": "flocking",
        "seed": 3,
        "model": "acmp-explicit",
        "params": {"alpha": 1.0, "delta": 0.5, "beta": 0.0},
        "initial": {"kind": "group_centers", "centers": [2.0, -2.0], "spread": 0.1, "dim": 1},
        "solver": {"method": "dopri5", "t_end": 30.0, "sample_every": 1.0},
        "outputs": {"series": ["trajectory", "energy", "clusters", "flocking"]},
        "flocking": {"n1": 5, "n2": 5, "s": 1.0, "d": 0.1, "eta": 0.1, "c_prime": 0.5},
    }],
    "trapping": [{
        "name": "trapping",
        "seed": 5,
        "graph": {"n": 50, "p_in": 0.1, "p_out": 0.05, "means": [-0.5, 0.5], "sigma": 0.1, "dim": 2},
        "model": "acmp-trap",
        "params": {"alpha": 1.0, "delta": 1.0, "beta": 0.5},
        "initial": {"kind": "group_centers", "centers": [0.97, -0.97], "spread": 0.02},
        "solver": {"method": "dopri5", "t_end": 50.0, "sample_every": 1.0},
    }],
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def raw_preset(name: str) -> list[dict[str, Any]]:
    """预设的原始字典（深拷贝，可随意修改）"""
    if name not in PRESETS:
        raise ConfigError(f"未知预设: {name}（可选: {', '.join(preset_names())}）")
    return copy.deepcopy(PRESETS[name])


def load_preset(name: str) -> list[ExperimentConfig]:
    return [ExperimentConfig.model_validate(raw) for raw in raw_preset(name)]
