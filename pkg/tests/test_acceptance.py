"""
端到端验收测试

用内置预设和 ExperimentManager 复现动力学层面的结论：
过平滑对比、有界性、无势阱时的爆破、势阱捕获、双簇聚集、守恒与符号保持、2^d 聚类。
"""

import time

import numpy as np
import pytest

from acmp import config
from acmp.coupling import gcn_coupling
from acmp.diagnostics import (
    bicluster_check,
    corner_proximity,
    cross_group_energy_bound,
    decay_rate,
    dirichlet_energy,
    flocking_series,
    flocking_condition,
    is_steady_state,
    mass_center,
    moment_series,
    sign_clusters,
    sup_norm_series,
)
from acmp.dynamics import AcmpParams, AcmpSystem, rhs_grand
from acmp.models import ExperimentConfig, ModelKind, SolverSpec
from acmp.presets import load_preset, raw_preset
from acmp.solver import integrate


def _preset(name: str, index: int = 0, **updates) -> ExperimentConfig:
    """取预设并按嵌套字典覆盖部分字段"""
    raw = raw_preset(name)[index]
    for key, value in updates.items():
        if isinstance(value, dict):
            raw.setdefault(key, {}).update(value)
        else:
            raw[key] = value
    return ExperimentConfig.model_validate(raw)


# ============================================================
# 过平滑对比
# ============================================================

class TestOversmoothingContrast:
    """GRAND 能量指数衰减，ACMP 保持非平凡能量"""

    def test_fig4(self, manager):
        grand_cfg, acmp_cfg = load_preset("fig4")
        started = time.perf_counter()

        grand = manager.run(grand_cfg)
        energies = [dirichlet_energy(grand.graph, x) for x in grand.trajectory.states]
        assert energies[-1] / energies[0] <= 1e-6

        acmp = manager.run(acmp_cfg)
        assert not acmp.trajectory.blow_up
        assert dirichlet_energy(acmp.graph, acmp.trajectory.final_state) >= 0.01
        assert time.perf_counter() - started <= 10.0

    def test_k2_energy_oracle(self, k2):
        spec = SolverSpec(t_end=2.0, sample_every=0.5, atol=1e-9, rtol=1e-9)
        traj = integrate(lambda x: rhs_grand(k2, x), np.array([[1.0], [-1.0]]), spec)
        for t, x in zip(traj.times, traj.states):
            if t in (0.5, 1.0, 2.0):
                assert abs(dirichlet_energy(k2, x) - 4.0 * np.exp(-4.0 * t)) <= 1e-6

    def test_k2_decay_rate(self, k2):
        spec = SolverSpec(t_end=5.0, sample_every=0.25, atol=1e-12, rtol=1e-10)
        traj = integrate(lambda x: rhs_grand(k2, x), np.array([[1.0], [-1.0]]), spec)
        energies = [dirichlet_energy(k2, x) for x in traj.states]
        assert decay_rate(traj.times, energies) == pytest.approx(4.0, rel=1e-3)

    def test_path_decay_rate_above_spectral_gap(self, path3):
        """P3 的 Laplacian 谱为 {0, 1, 3}，能量衰减率介于 2λ₂ 与 2λ_max 之间"""
        spec = SolverSpec(t_end=10.0, sample_every=0.5, atol=1e-12, rtol=1e-10)
        traj = integrate(lambda x: rhs_grand(path3, x), np.array([[1.0], [0.0], [0.0]]), spec)
        energies = [dirichlet_energy(path3, x) for x in traj.states]
        assert energies[-1] < energies[0]
        rate = decay_rate(traj.times, energies)
        assert 2.0 * (1 - 1e-3) <= rate <= 6.0


# ============================================================
# 有界性与爆破
# ============================================================

class TestBoundedness:
    """有势阱时解一致有界"""

    @pytest.mark.parametrize("seed", range(20))
    def test_bounded(self, manager, seed):
        cfg = ExperimentConfig.model_validate({
            "name": f"bounded-{seed}",
            "seed": seed,
            "graph": {"n": 30, "p_in": 0.2, "p_out": 0.05, "dim": 2},
            "model": "acmp-gcn",
            "params": {"alpha": 1.0, "delta": 1.0, "beta": [0.0, 0.5, 1.0][seed % 3]},
            "initial": {"kind": "uniform", "low": -5.0, "high": 5.0, "dim": 2},
            "solver": {"t_end": 30.0, "sample_every": 1.0},
        })
        traj = manager.run(cfg).trajectory
        assert not traj.blow_up
        late = traj.times >= 5.0
        assert sup_norm_series(traj)[late].max() <= 10.0


class TestBlowUp:
    """排斥占优且没有势阱时特征发散"""

    def test_without_wells(self, manager):
        traj = manager.run(load_preset("fig6")[0]).trajectory
        peak = sup_norm_series(traj).max()
        assert 1e2 <= peak <= 1e6
        assert traj.blow_up

    def test_with_wells_stays_bounded(self, manager):
        traj = manager.run(_preset("fig6", params={"delta": 1.0})).trajectory
        assert not traj.blow_up
        assert sup_norm_series(traj).max() <= 10.0

    def test_sweep_flags_blow_up(self, manager, tmp_dir):
        rows = manager.sweep_beta(load_preset("fig6")[0], grid=[0.75], out_dir=tmp_dir)
        assert rows[0].blow_up


# ============================================================
# 势阱捕获
# ============================================================

class TestTrapping:
    """初值靠近 ±1 时不会越过 0"""

    @pytest.mark.parametrize("beta", [0.0, 0.5])
    def test_no_sign_change(self, manager, beta):
        traj = manager.run(_preset("trapping", params={"beta": beta})).trajectory
        assert not traj.blow_up
        assert traj.times[-1] == 50.0
        signs = np.sign(traj.states)
        assert np.all(signs == signs[0])
        assert np.all(traj.states[0] != 0.0)


# ============================================================
# 双簇聚集
# ============================================================

class TestFlocking:
    """双簇耦合下的分离与充分条件"""

    def test_preset(self, manager):
        cfg = load_preset("flocking")[0]
        result = manager.run(cfg)
        f = cfg.flocking

        condition = flocking_condition(
            result.params.coupling, result.partition, alpha=1.0, delta=0.5, eta=f.eta
        )
        assert condition.holds
        assert condition.margin == pytest.approx(3.9)

        verdict = bicluster_check(result.trajectory, result.partition, f.c_prime)
        assert verdict.separated
        assert verdict.t_check == pytest.approx(24.0)
        assert verdict.inter_min >= 0.5

        energy, bound = cross_group_energy_bound(
            result.graph, result.trajectory.final_state, result.partition, verdict.inter_min
        )
        assert bound > 0
        assert energy >= bound

    def test_equilibrium_separation(self, manager):
        """组内一致后两组停在 ±√3"""
        result = manager.run(load_preset("flocking")[0])
        final = result.trajectory.final_state.ravel()
        assert np.allclose(final[:5], np.sqrt(3.0), atol=1e-3)
        assert np.allclose(final[5:], -np.sqrt(3.0), atol=1e-3)

    def test_second_moments_bounded(self, manager):
        """组二阶矩不超过初值与平衡值 3 中的较大者，组内散布收缩到零"""
        result = manager.run(load_preset("flocking")[0])
        series = moment_series(result.trajectory, result.partition)
        assert len(series) == len(result.trajectory)

        first = series[0]
        bound_v = max(first.m2_v, 3.0) + 1e-3
        bound_w = max(first.m2_w, 3.0) + 1e-3
        for report in series:
            assert 0.0 <= report.m2_v <= bound_v
            assert 0.0 <= report.m2_w <= bound_w
            assert report.m2_hat <= report.m2_v + report.m2_w + 1e-12

        last = series[-1]
        assert last.m2_v == pytest.approx(3.0, abs=1e-2)
        assert last.m2_w == pytest.approx(3.0, abs=1e-2)
        assert last.m2_hat <= 1e-6

    def test_decoupled_consensus(self, manager):
        """δ = 0、d = 0：两组各自达成一致

        组内模态较刚性，残余间距与积分容差同量级，这里收紧容差。
        """
        cfg = _preset(
            "flocking",
            params={"delta": 0.0},
            flocking={"d": 0.0},
            solver={"atol": 1e-11, "rtol": 1e-9},
        )
        result = manager.run(cfg)
        _, spread_1, spread_2, _ = flocking_series(result.trajectory, result.partition)[-1]
        assert spread_1 <= 1e-6
        assert spread_2 <= 1e-6


# ============================================================
# 守恒与符号
# ============================================================

class TestConservation:
    """质心守恒、符号保持、稳态范围"""

    def test_mass_center(self, synthetic):
        g, features = synthetic
        system = AcmpSystem(g, ModelKind.ACMP_GCN, AcmpParams(coupling=gcn_coupling(0.0), delta=0.0))
        traj = integrate(system, features, SolverSpec(t_end=10.0, sample_every=1.0))
        start = mass_center(traj.states[0])
        drift = max(np.max(np.abs(mass_center(x) - start)) for x in traj.states)
        assert drift <= 1e-7

    @pytest.mark.parametrize("seed", range(20))
    def test_sign_preservation(self, manager, seed):
        cfg = ExperimentConfig.model_validate({
            "name": f"sign-{seed}",
            "seed": seed,
            "graph": {"n": 20, "p_in": 0.5, "p_out": 0.1, "dim": 2},
            "model": "acmp-attn",
            "params": {"alpha": 1.0, "delta": 1.0, "beta": 0.0},
            "initial": {"kind": "uniform", "low": 0.05, "high": 1.0, "dim": 2},
            "solver": {"t_end": 10.0, "sample_every": 1.0},
        })
        traj = manager.run(cfg).trajectory
        assert traj.states.min() >= 0.0

    @pytest.mark.parametrize("fixture", ["k2", "path3"])
    def test_steady_states_in_unit_box(self, request, rng, fixture):
        g = request.getfixturevalue(fixture)
        system = AcmpSystem(g, ModelKind.ACMP_GCN, AcmpParams(coupling=gcn_coupling(0.0)))
        for _ in range(5):
            x0 = rng.uniform(-2.0, 2.0, size=(g.node_count, 1))
            traj = integrate(system, x0, SolverSpec(t_end=60.0, atol=1e-12, rtol=1e-12))
            final = traj.final_state
            assert is_steady_state(system, final, tol=config.STEADY_STATE_TOL)
            assert np.all(np.abs(final) <= 1.0 + 1e-8)


# ============================================================
# 2^d 聚类与 β 扫描
# ============================================================

class TestClustering:
    """二维特征聚到 {±1}² 的角点"""

    def test_fig2(self, manager):
        traj = manager.run(load_preset("fig2")[0]).trajectory
        final = traj.final_state
        assert sign_clusters(final).count <= 4
        assert corner_proximity(final, tol=0.2) >= 0.9

    def test_fig5_sweep(self, manager, tmp_dir):
        rows = manager.sweep_beta(load_preset("fig5")[0], out_dir=tmp_dir)
        assert [r.beta for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert all(np.isfinite(r.separation) for r in rows)
        assert (tmp_dir / "sweep.csv").exists()
