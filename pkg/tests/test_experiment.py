"""
实验管理器测试

测试配置装配（图、耦合、参数、初值）、单次模拟与输出目录、β 扫描、图导出和双簇聚集实验。
"""

import json
import logging

import numpy as np
import pytest

from acmp import config
from acmp.coupling import CouplingKind
from acmp.errors import ConfigError, InvalidProbabilityError
from acmp.logger import SWEEP_THREAD_PREFIX, WorkerTagFilter
from acmp.models import ExperimentConfig, ModelKind, TwoClassGraphSpec
from acmp.presets import load_preset
from acmp.store import CsvRunStore

SMALL_GRAPH = {"n": 20, "p_in": 0.5, "p_out": 0.1, "means": [-0.5, 0.5], "sigma": 0.5, "dim": 2}


def _config(**fields) -> ExperimentConfig:
    raw = {
        "name": "small",
        "seed": 1,
        "graph": SMALL_GRAPH,
        "model": "acmp-gcn",
        "solver": {"t_end": 1.0, "sample_every": 0.5},
    }
    raw.update(fields)
    return ExperimentConfig.model_validate(raw)


# ============================================================
# 装配
# ============================================================

class TestAssembly:
    """图、耦合、参数"""

    def test_resolve_seed(self, manager):
        assert manager.resolve_seed(_config(seed=9)) == 9
        assert manager.resolve_seed(_config(seed=None)) == config.DEFAULT_SEED

    def test_generated_graph_has_features(self, manager):
        g, features = manager.build_graph(_config(), 1)
        assert g.node_count == 20
        assert features.shape == (20, 2)
        assert g.labels.tolist() == [0] * 10 + [1] * 10

    def test_graph_from_files(self, manager, tmp_dir):
        (tmp_dir / "edges.txt").write_text("0 1 1.0\n1 2 2.0\n", encoding="utf-8")
        (tmp_dir / "features.txt").write_text("0.1\n0.2\n0.3\n", encoding="utf-8")
        cfg = _config(graph={"edges": str(tmp_dir / "edges.txt"), "features": str(tmp_dir / "features.txt")})
        g, features = manager.build_graph(cfg, 0)
        assert g.edges() == [(0, 1, 1.0), (1, 2, 2.0)]
        assert features.ravel().tolist() == [0.1, 0.2, 0.3]

    def test_flocking_complete_graph(self, manager):
        cfg = _config(graph=None, flocking={"n1": 2, "n2": 3})
        g, features = manager.build_graph(cfg, 0)
        assert features is None
        assert g.edge_count == 10
        assert g.labels.tolist() == [0, 0, 1, 1, 1]

    def test_missing_graph(self, manager):
        with pytest.raises(ConfigError):
            manager.build_graph(_config(graph=None), 0)

    def test_attention_coupling(self, manager):
        cfg = _config(model="acmp-attn", params={"beta": 0.2, "attention": {"projection_dim": 3}})
        g, _ = manager.build_graph(cfg, 1)
        coupling = manager.build_coupling(cfg, g, 2, 1)
        assert coupling.kind is CouplingKind.ATTENTION
        assert coupling.attention.theta.shape == (2, 3)
        assert coupling.beta == 0.2

    def test_explicit_needs_source(self, manager):
        cfg = _config(model="acmp-explicit")
        g, _ = manager.build_graph(cfg, 1)
        with pytest.raises(ConfigError):
            manager.build_coupling(cfg, g, 2, 1)

    def test_explicit_from_file(self, manager, tmp_dir, path3):
        path = tmp_dir / "coupling.txt"
        path.write_text("0 1 0.5\n1 2 -0.5\n", encoding="utf-8")
        cfg = _config(model="acmp-explicit", params={"coupling_file": str(path), "beta": 0.1})
        coupling = manager.build_coupling(cfg, path3, 1, 0)
        assert coupling.kind is CouplingKind.EXPLICIT
        assert coupling.beta == 0.1

    def test_params(self, manager):
        cfg = _config(model="acmp-trap", params={"alpha": [1.0, 2.0], "delta": 0.5,
                                                 "potential": {"kind": "sine", "wells": 1}})
        g, _ = manager.build_graph(cfg, 1)
        params = manager.build_params(cfg, g, 2, 1)
        assert params.trapping
        assert params.alpha.tolist() == [1.0, 2.0]
        assert params.potential.wells == 1

    def test_gradient_flow_has_no_params(self, manager):
        cfg = _config(model="gradient-flow")
        g, _ = manager.build_graph(cfg, 1)
        assert manager.build_params(cfg, g, 2, 1) is None


class TestInitialState:
    """初值"""

    def test_graph_features(self, manager):
        cfg = _config()
        g, features = manager.build_graph(cfg, 1)
        assert np.array_equal(manager.initial_state(cfg, g, features, 1), features)

    def test_graph_kind_needs_features(self, manager, path3):
        with pytest.raises(ConfigError):
            manager.initial_state(_config(), path3, None, 0)

    def test_uniform(self, manager, path3):
        cfg = _config(initial={"kind": "uniform", "low": 0.5, "high": 1.5, "dim": 3})
        x0 = manager.initial_state(cfg, path3, None, 4)
        assert x0.shape == (3, 3)
        assert np.all((x0 >= 0.5) & (x0 <= 1.5))
        assert np.array_equal(x0, manager.initial_state(cfg, path3, None, 4))
        assert not np.array_equal(x0, manager.initial_state(cfg, path3, None, 5))

    def test_uniform_bad_interval(self, manager, path3):
        cfg = _config(initial={"kind": "uniform", "low": 1.0, "high": 0.0})
        with pytest.raises(ConfigError):
            manager.initial_state(cfg, path3, None, 0)

    def test_group_centers(self, manager, triangle):
        cfg = _config(initial={"kind": "group_centers", "centers": [1.0, -1.0], "spread": 0.1})
        x0 = manager.initial_state(cfg, triangle, None, 0)
        assert x0.shape == (3, 1)
        assert np.all(np.abs(x0[:2] - 1.0) <= 0.1)
        assert np.all(np.abs(x0[2] + 1.0) <= 0.1)

    def test_group_centers_needs_labels(self, manager, path3):
        cfg = _config(initial={"kind": "group_centers"})
        with pytest.raises(ConfigError):
            manager.initial_state(cfg, path3, None, 0)

    def test_group_centers_too_few(self, manager, triangle):
        cfg = _config(initial={"kind": "group_centers", "centers": [1.0]})
        with pytest.raises(ConfigError):
            manager.initial_state(cfg, triangle, None, 0)


# ============================================================
# 模拟与输出
# ============================================================

class TestSimulate:
    """run / simulate"""

    def test_run(self, manager):
        result = manager.run(_config())
        traj = result.trajectory
        assert traj.times.tolist() == [0.0, 0.5, 1.0]
        assert traj.states.shape == (3, 20, 2)
        assert result.partition.tolist() == [0] * 10 + [1] * 10
        assert not traj.blow_up

    @pytest.mark.parametrize("model", ["grand", "acmp-gcn", "acmp-attn", "acmp-trap", "gradient-flow"])
    def test_every_model_runs(self, manager, model):
        result = manager.run(_config(model=model))
        assert np.all(np.isfinite(result.trajectory.final_state))

    def test_outputs(self, manager, tmp_dir):
        summary = manager.simulate(_config(), tmp_dir / "out")
        assert summary.output_files == ["trajectory.csv", "energy.csv", "clusters.csv", "run.json"]
        for name in summary.output_files:
            assert (tmp_dir / "out" / name).exists()
        assert summary.seed == 1
        assert summary.config["seed"] == 1
        assert summary.node_count == 20
        assert summary.homophily is not None
        assert summary.flocking is None

    def test_summary_replays(self, manager, tmp_dir):
        """run.json 里的配置可以原样重跑出相同轨迹"""
        manager.simulate(_config(), tmp_dir / "a")
        echo = CsvRunStore().read_summary(tmp_dir / "a").config
        manager.simulate(ExperimentConfig.model_validate(echo), tmp_dir / "b")
        first = (tmp_dir / "a" / "trajectory.csv").read_bytes()
        assert first == (tmp_dir / "b" / "trajectory.csv").read_bytes()

    def test_default_seed_recorded(self, manager, tmp_dir):
        summary = manager.simulate(_config(seed=None), tmp_dir)
        assert summary.seed == config.DEFAULT_SEED
        assert json.loads((tmp_dir / "run.json").read_text(encoding="utf-8"))["seed"] == config.DEFAULT_SEED

    def test_default_output_dir(self, manager):
        manager.simulate(_config(name="default-dir"))
        assert (config.OUTPUT_DIR / "default-dir" / "run.json").exists()

    def test_selected_series(self, manager, tmp_dir):
        cfg = _config(outputs={"series": ["energy"]})
        summary = manager.simulate(cfg, tmp_dir)
        assert summary.output_files == ["energy.csv", "run.json"]
        assert not (tmp_dir / "trajectory.csv").exists()

    def test_flocking_series_without_groups(self, manager, tmp_dir):
        """只有一组标签时跳过 flocking 序列"""
        (tmp_dir / "edges.txt").write_text("0 1 1.0\n", encoding="utf-8")
        cfg = _config(
            graph={"edges": str(tmp_dir / "edges.txt")},
            initial={"kind": "uniform", "dim": 1},
            outputs={"series": ["flocking"]},
        )
        summary = manager.simulate(cfg, tmp_dir / "out")
        assert summary.output_files == ["run.json"]

    def test_invalid_probability(self, manager):
        cfg = _config(graph={"n": 10, "p_in": 0.1, "p_out": 0.5})
        with pytest.raises(InvalidProbabilityError):
            manager.run(cfg)


# ============================================================
# β 扫描
# ============================================================

class TestSweepBeta:
    """sweep_beta"""

    def test_rows(self, manager, tmp_dir):
        rows = manager.sweep_beta(_config(), grid=[0.0, 0.5], out_dir=tmp_dir)
        assert [r.beta for r in rows] == [0.0, 0.5]
        assert all(np.isfinite(r.separation) for r in rows)
        assert (tmp_dir / "sweep.csv").exists()

    def test_config_grid(self, manager, tmp_dir):
        rows = manager.sweep_beta(_config(beta_grid=[0.1, 0.2, 0.3]), out_dir=tmp_dir)
        assert [r.beta for r in rows] == [0.1, 0.2, 0.3]

    def test_parallel_matches_serial(self, manager, tmp_dir):
        serial = manager.sweep_beta(_config(), grid=[0.0, 0.5, 1.0], jobs=1, out_dir=tmp_dir / "a")
        parallel = manager.sweep_beta(_config(), grid=[0.0, 0.5, 1.0], jobs=3, out_dir=tmp_dir / "b")
        assert [r.model_dump() for r in serial] == [r.model_dump() for r in parallel]

    def test_negative_grid(self, manager, tmp_dir):
        with pytest.raises(ConfigError):
            manager.sweep_beta(_config(), grid=[0.0, -0.5], out_dir=tmp_dir)

    def test_worker_logs_tagged(self, manager, tmp_dir, caplog):
        """扫描线程里的日志带线程名前缀"""
        caplog.set_level(logging.WARNING)
        manager.sweep_beta(load_preset("fig6")[0], grid=[0.75, 1.0], jobs=2, out_dir=tmp_dir)
        blow_ups = [r for r in caplog.records if r.getMessage().startswith("检测到爆破")]
        assert len(blow_ups) == 2
        assert all(r.worker.startswith(f"[{SWEEP_THREAD_PREFIX}") for r in blow_ups)

    def test_main_thread_logs_untagged(self):
        record = logging.LogRecord("acmp.test", logging.INFO, __file__, 1, "msg", None, None)
        WorkerTagFilter().filter(record)
        assert record.worker == ""


# ============================================================
# 图导出
# ============================================================

class TestGenerateGraph:
    """generate_graph"""

    def test_files(self, manager, tmp_dir):
        spec = TwoClassGraphSpec(n=30, p_in=0.5, p_out=0.1, dim=3)
        paths = manager.generate_graph(spec, tmp_dir, seed=2)
        assert set(paths) == {"edges", "labels", "features", "header"}
        header = json.loads(paths["header"].read_text(encoding="utf-8"))
        assert header["seed"] == 2
        assert header["spec"]["dim"] == 3

    def test_reproducible(self, manager, tmp_dir):
        spec = TwoClassGraphSpec(n=30, p_in=0.5, p_out=0.1)
        a = manager.generate_graph(spec, tmp_dir / "a", seed=2)
        b = manager.generate_graph(spec, tmp_dir / "b", seed=2)
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes()

    def test_spec_seed_wins(self, manager, tmp_dir):
        spec = TwoClassGraphSpec(n=10, p_in=0.5, p_out=0.1, seed=8)
        paths = manager.generate_graph(spec, tmp_dir, seed=2)
        assert json.loads(paths["header"].read_text(encoding="utf-8"))["seed"] == 8


# ============================================================
# 双簇聚集
# ============================================================

class TestFlocking:
    """flocking 实验"""

    def test_preset(self, manager, tmp_dir):
        cfg = load_preset("flocking")[0]
        report = manager.flocking(cfg, tmp_dir)
        assert report["condition"]["holds"]
        assert report["verdict"]["separated"]
        assert report["agreement"] == "condition_holds_and_separated"
        assert not report["blow_up"]
        assert (tmp_dir / "flocking.csv").exists()
        assert CsvRunStore().read_summary(tmp_dir).flocking.separated

    def test_default_flocking_section(self, manager, tmp_dir):
        cfg = ExperimentConfig.model_validate({
            "name": "defaults",
            "seed": 3,
            "params": {"delta": 0.5},
            "initial": {"kind": "group_centers", "centers": [2.0, -2.0], "dim": 1},
            "solver": {"t_end": 5.0},
        })
        report = manager.flocking(cfg, tmp_dir)
        assert report["condition"]["n1"] == 5
        assert report["condition"]["holds"]

    def test_condition_fails(self, manager, tmp_dir):
        cfg = load_preset("flocking")[0]
        cfg = cfg.model_copy(update={"flocking": cfg.flocking.model_copy(update={"s": 0.1, "d": 0.1})})
        report = manager.flocking(cfg, tmp_dir)
        assert not report["condition"]["holds"]
        assert report["condition"]["margin"] < 0
        assert report["agreement"].startswith("condition_fails")
