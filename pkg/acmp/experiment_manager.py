"""
实验管理器

面向命令行的高层 API，组合图、耦合、右端项、积分器、诊断和结果存储。
提供单次模拟、β 扫描、图导出和双簇聚集实验。
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from acmp import __version__, config
from acmp.coupling import (
    CouplingModel,
    attention_coupling,
    flocking_partition_coupling,
    gcn_coupling,
    random_attention_params,
    two_group_partition,
)
from acmp.diagnostics import (
    bicluster_check,
    dirichlet_energy,
    energy_series,
    flocking_condition,
    moments,
    sign_clusters,
)
from acmp.dynamics import AcmpParams, AcmpSystem, grand_params, make_potential
from acmp.errors import ConfigError
from acmp.graph import Graph, complete_graph, generate_two_class_graph, homophily_report
from acmp.logger import SWEEP_THREAD_PREFIX, get_logger
from acmp.models import (
    ExperimentConfig,
    FlockingCheckSpec,
    GraphFileRef,
    InitialKind,
    ModelKind,
    RunSummary,
    SeriesKind,
    SweepRow,
    TwoClassGraphSpec,
)
from acmp.solver import Trajectory, integrate
from acmp.store import BaseRunStore, create_run_store
from acmp.store.graph_store import load_coupling_matrix, load_features, load_graph, write_graph

logger = get_logger(__name__)

DEFAULT_BETA_GRID = [0.0, 0.25, 0.5, 0.75, 1.0]


@dataclass
class RunResult:
    """一次模拟的内存结果（尚未写盘）"""
    config: ExperimentConfig
    seed: int
    graph: Graph
    params: Optional[AcmpParams]
    trajectory: Trajectory
    partition: Optional[np.ndarray] = None


class ExperimentManager:
    """
    实验管理器 — ACMP 命令行的业务层

    使用示例：
    ```python
    from acmp.experiment_manager import ExperimentManager
    from acmp.presets import load_preset

    manager = ExperimentManager()
    for cfg in load_preset("fig4"):
        summary = manager.simulate(cfg, out_dir=Path("runs/fig4") / cfg.name)
    ```
    """

    def __init__(self, store: Optional[BaseRunStore] = None):
        self._store = store or create_run_store()

    # ----------------------------------------------------------
    # 装配
    # ----------------------------------------------------------

    @staticmethod
    def resolve_seed(cfg: ExperimentConfig) -> int:
        return cfg.seed if cfg.seed is not None else config.DEFAULT_SEED

    def build_graph(self, cfg: ExperimentConfig, seed: int) -> tuple[Graph, Optional[np.ndarray]]:
        """返回 (图, 图自带特征或 None)"""
        spec = cfg.graph
        if isinstance(spec, TwoClassGraphSpec):
            return generate_two_class_graph(spec, seed=seed)
        if isinstance(spec, GraphFileRef):
            g = load_graph(spec.edges, spec.labels, spec.node_count)
            features = load_features(spec.features, g.node_count) if spec.features else None
            return g, features
        if cfg.flocking is not None:
            n1, n2 = cfg.flocking.n1, cfg.flocking.n2
            return complete_graph(n1 + n2, labels=two_group_partition(n1, n2)), None
        raise ConfigError("配置缺少 graph")

    def build_coupling(self, cfg: ExperimentConfig, g: Graph, dim: int, seed: int) -> CouplingModel:
        p = cfg.params
        if cfg.model is ModelKind.ACMP_ATTN:
            attn = p.attention
            theta = random_attention_params(
                dim, attn.projection_dim,
                seed=attn.seed if attn.seed is not None else seed,
                leaky_slope=attn.leaky_slope,
            )
            return attention_coupling(theta, beta=p.beta)
        if cfg.model is ModelKind.ACMP_EXPLICIT:
            if p.coupling_file:
                model = load_coupling_matrix(p.coupling_file, g.node_count)
            elif cfg.flocking is not None:
                f = cfg.flocking
                model = flocking_partition_coupling(f.n1, f.n2, f.s, f.d)
            else:
                raise ConfigError("acmp-explicit 需要 params.coupling_file 或 flocking 配置")
            return replace(model, beta=p.beta)
        return gcn_coupling(beta=p.beta)

    def build_params(self, cfg: ExperimentConfig, g: Graph, dim: int, seed: int) -> Optional[AcmpParams]:
        if cfg.model is ModelKind.GRAND:
            return grand_params(g)
        if cfg.model is ModelKind.GRADIENT_FLOW:
            return None
        p = cfg.params
        return AcmpParams(
            coupling=self.build_coupling(cfg, g, dim, seed),
            alpha=p.alpha,
            delta=p.delta,
            potential=make_potential(p.potential.kind.value, p.potential.roots, p.potential.wells),
            trapping=cfg.model is ModelKind.ACMP_TRAP,
        )

    @staticmethod
    def initial_state(
        cfg: ExperimentConfig, g: Graph, features: Optional[np.ndarray], seed: int
    ) -> np.ndarray:
        """
        初值

        随机初值使用种子序列的第 2 个子流（0、1 号留给图的拓扑和特征）。
        """
        init = cfg.initial
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
        dim = init.dim or (features.shape[1] if features is not None else 1)

        if init.kind is InitialKind.GRAPH:
            if features is None:
                raise ConfigError("initial.kind=graph 需要图自带特征（生成图或 features 文件）")
            return np.array(features, dtype=float)
        if init.kind is InitialKind.UNIFORM:
            if init.high < init.low:
                raise ConfigError(f"均匀初值区间非法: [{init.low}, {init.high}]")
            return rng.uniform(init.low, init.high, size=(g.node_count, dim))

        if g.labels is None:
            raise ConfigError("initial.kind=group_centers 需要节点标签")
        labels = np.asarray(g.labels)
        if labels.min() < 0 or labels.max() >= len(init.centers):
            raise ConfigError(f"标签取值超出 centers 长度 {len(init.centers)}")
        centers = np.asarray(init.centers, dtype=float)[labels]
        return centers[:, None] + rng.uniform(-init.spread, init.spread, size=(g.node_count, dim))

    # ----------------------------------------------------------
    # 运行
    # ----------------------------------------------------------

    def run(self, cfg: ExperimentConfig) -> RunResult:
        """执行一次模拟，不写文件"""
        seed = self.resolve_seed(cfg)
        g, features = self.build_graph(cfg, seed)
        x0 = self.initial_state(cfg, g, features, seed)
        params = self.build_params(cfg, g, x0.shape[1], seed)

        rhs_params = None if cfg.model is ModelKind.GRAND else params
        system = AcmpSystem(g, cfg.model, rhs_params)
        logger.info(
            "运行实验 %s: model=%s, N=%d, d=%d, seed=%d",
            cfg.name, cfg.model.value, g.node_count, x0.shape[1], seed,
        )
        trajectory = integrate(system, x0, cfg.solver)
        partition = np.asarray(g.labels) if g.labels is not None else None
        return RunResult(
            config=cfg, seed=seed, graph=g, params=params,
            trajectory=trajectory, partition=partition,
        )

    def output_dir(self, cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> Path:
        if out_dir is not None:
            return Path(out_dir)
        if cfg.outputs.directory:
            return Path(cfg.outputs.directory)
        return Path(config.OUTPUT_DIR) / cfg.name

    def _flocking_verdict(self, result: RunResult):
        cfg = result.config
        if cfg.flocking is None or result.partition is None:
            return None
        groups = result.partition
        if not np.all((groups == 0) | (groups == 1)) or groups.min() == groups.max():
            logger.warning("标签不是两组划分，跳过双簇聚集检查")
            return None
        return bicluster_check(result.trajectory, groups, cfg.flocking.c_prime, cfg.flocking.t_check)

    def summarize(self, result: RunResult, output_files: Sequence[str] = ()) -> RunSummary:
        g, traj, cfg = result.graph, result.trajectory, result.config
        homophily = None
        if g.labels is not None and g.edge_count > 0:
            homophily = homophily_report(g)
        echo = cfg.model_dump(mode="json")
        echo["seed"] = result.seed
        return RunSummary(
            name=cfg.name,
            model=cfg.model,
            seed=result.seed,
            env=config.ENV_NAME,
            version=__version__,
            config=echo,
            solver=traj.stats,
            blow_up=traj.blow_up,
            node_count=g.node_count,
            edge_count=g.edge_count,
            final_dirichlet=dirichlet_energy(g, traj.final_state),
            homophily=homophily,
            flocking=self._flocking_verdict(result),
            output_files=list(output_files),
        )

    def write_outputs(self, result: RunResult, run_dir: Path) -> RunSummary:
        series = set(result.config.outputs.series)
        traj = result.trajectory
        files: list[Path] = []
        if SeriesKind.TRAJECTORY in series:
            files.append(self._store.write_trajectory(run_dir, traj))
        if SeriesKind.ENERGY in series:
            files.append(self._store.write_energy(run_dir, energy_series(traj, result.graph, result.params)))
        if SeriesKind.CLUSTERS in series:
            files.append(self._store.write_clusters(run_dir, traj))
        if SeriesKind.FLOCKING in series:
            groups = result.partition
            if groups is None or groups.min() == groups.max():
                logger.warning("没有两组标签，跳过 flocking 序列")
            else:
                files.append(self._store.write_flocking(run_dir, traj, groups))

        names = [p.name for p in files] + ["run.json"]
        summary = self.summarize(result, names)
        self._store.write_summary(run_dir, summary)
        logger.info("输出写入 %s: %s", run_dir, ", ".join(names))
        return summary

    def simulate(self, cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> RunSummary:
        """模拟并写出 trajectory / energy / clusters / run.json"""
        result = self.run(cfg)
        return self.write_outputs(result, self.output_dir(cfg, out_dir))

    # ----------------------------------------------------------
    # β 扫描
    # ----------------------------------------------------------

    def sweep_point(self, cfg: ExperimentConfig, beta: float) -> SweepRow:
        point = cfg.model_copy(update={"params": cfg.params.model_copy(update={"beta": beta})})
        result = self.run(point)
        final = result.trajectory.final_state
        separation = float("nan")
        if result.partition is not None:
            report = moments(final, result.partition)
            if report.center_1 is not None and report.center_2 is not None:
                separation = float(np.linalg.norm(np.subtract(report.center_1, report.center_2)))
        return SweepRow(
            beta=beta,
            final_dirichlet=dirichlet_energy(result.graph, final),
            cluster_count=sign_clusters(final).count,
            separation=separation,
            blow_up=result.trajectory.blow_up,
        )

    def sweep_beta(
        self,
        cfg: ExperimentConfig,
        grid: Optional[Sequence[float]] = None,
        jobs: Optional[int] = None,
        out_dir: Optional[Path] = None,
    ) -> list[SweepRow]:
        """
        同一种子下逐个 β 运行，每个网格点一行汇总

        网格点之间相互独立，按 jobs 上限并行；每个运行内部仍按时间顺序推进。
        """
        grid = list(grid if grid is not None else (cfg.beta_grid or DEFAULT_BETA_GRID))
        if any(b < 0 for b in grid):
            raise ConfigError(f"β 网格必须非负: {grid}")
        jobs = max(1, jobs or config.DEFAULT_JOBS)
        logger.info("β 扫描: %d 个网格点, jobs=%d", len(grid), jobs)

        with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix=SWEEP_THREAD_PREFIX) as pool:
            rows = list(pool.map(lambda b: self.sweep_point(cfg, float(b)), grid))

        self._store.write_sweep(self.output_dir(cfg, out_dir), rows)
        return rows

    # ----------------------------------------------------------
    # 图导出
    # ----------------------------------------------------------

    def generate_graph(
        self, spec: TwoClassGraphSpec, out_dir: Path, seed: Optional[int] = None
    ) -> dict[str, Path]:
        resolved = spec.seed if spec.seed is not None else (
            seed if seed is not None else config.DEFAULT_SEED
        )
        g, features = generate_two_class_graph(spec, seed=resolved)
        header = {"spec": spec.model_dump(mode="json"), "seed": resolved}
        return write_graph(out_dir, g, features, header)

    # ----------------------------------------------------------
    # 双簇聚集
    # ----------------------------------------------------------

    def flocking(self, cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> dict[str, Any]:
        """
        构造双簇耦合，评估充分条件，再模拟并检查观测到的分离

        充分条件不成立时仍然运行，只报告观测结果与条件是否一致。
        """
        if cfg.flocking is None:
            cfg = cfg.model_copy(update={"flocking": FlockingCheckSpec()})
        f = cfg.flocking
        cfg = cfg.model_copy(update={"model": ModelKind.ACMP_EXPLICIT, "graph": None})

        result = self.run(cfg)
        params = result.params
        condition = flocking_condition(
            params.coupling, result.partition,
            alpha=params.scalar_alpha, delta=float(np.max(params.delta)), eta=f.eta,
        )
        verdict = bicluster_check(result.trajectory, result.partition, f.c_prime, f.t_check)
        if condition.holds:
            agreement = "condition_holds_and_separated" if verdict.separated else "condition_holds_but_not_separated"
        else:
            agreement = "condition_fails_but_separated" if verdict.separated else "condition_fails_and_not_separated"

        summary = self.write_outputs(result, self.output_dir(cfg, out_dir))
        logger.info("双簇聚集: margin=%.4g, separated=%s", condition.margin, verdict.separated)
        return {
            "condition": condition.model_dump(),
            "verdict": verdict.model_dump(),
            "agreement": agreement,
            "blow_up": summary.blow_up,
        }
