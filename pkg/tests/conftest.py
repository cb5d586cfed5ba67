"""
共享测试 Fixtures

小图（K2、路径、三角形、星形）、合成两类图，以及把输出目录重定向到临时目录的隔离配置。
"""

import os

import numpy as np
import pytest
from dotenv import load_dotenv


# --- 环境隔离 ---
def _setup_test_env():
    test_env_file = ".env.test"

    # ACMP_ENV=test 时优先加载 .env.test（不存在则沿用默认值）
    if os.getenv("ACMP_ENV") == "test" and os.path.exists(test_env_file):
        load_dotenv(test_env_file, override=True)
        print("🔧 已加载测试配置: .env.test")


# 必须在所有 acmp 内部模块导入前执行测试环境加载
_setup_test_env()

from acmp import config
from acmp.experiment_manager import ExperimentManager
from acmp.graph import build_graph, complete_graph, generate_two_class_graph
from acmp.models import TwoClassGraphSpec
from acmp.store import create_run_store


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """所有测试的默认输出目录都落在临时目录下"""
    monkeypatch.setattr(config, "OUTPUT_DIR", tmp_path / "runs")
    monkeypatch.setattr(config, "DEFAULT_SEED", 0)


@pytest.fixture
def tmp_dir(tmp_path):
    return tmp_path


@pytest.fixture
def k2():
    """两节点单位权重"""
    return build_graph([(0, 1, 1.0)], 2)


@pytest.fixture
def path3():
    """路径 0–1–2，单位权重"""
    return build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3)


@pytest.fixture
def triangle():
    """K3，标签 (A, A, B)"""
    return complete_graph(3, labels=[0, 0, 1])


@pytest.fixture
def star():
    """中心 0，三个叶子"""
    return build_graph([(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], 4)


@pytest.fixture(scope="session")
def synthetic_spec():
    """100 节点两类图，同类 0.9、异类 0.1，特征 N(±0.5, 2²)，二维"""
    return TwoClassGraphSpec(n=100, p_in=0.9, p_out=0.1, means=(-0.5, 0.5), sigma=2.0, dim=2)


@pytest.fixture(scope="session")
def synthetic(synthetic_spec):
    return generate_two_class_graph(synthetic_spec, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def manager():
    """使用默认 CSV 存储的 ExperimentManager"""
    return ExperimentManager(store=create_run_store())
