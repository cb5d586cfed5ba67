"""
诊断量

能量泛函、分组矩、双簇聚集判定与符号聚类。所有函数只读轨迹和状态，不修改输入。
分组（partition）是长度 N 的整数数组，0 表示第一组 𝓘₁，1 表示第二组 𝓘₂。
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from acmp import config
from acmp.coupling import CouplingKind, CouplingModel
from acmp.dynamics import AcmpParams, RhsFunction, pairwise_sum, pseudo_gl_energy
from acmp.errors import (
    ConfigError,
    DimensionMismatchError,
    InsufficientDataError,
    MissingExplicitEntryError,
    ScalarAlphaRequiredError,
)
from acmp.graph import Graph, as_features
from acmp.logger import get_logger
from acmp.models import EnergyReport, FlockingCondition, FlockingVerdict, MomentReport
from acmp.solver import Trajectory

logger = get_logger(__name__)

TensorInput = Union[np.ndarray, Mapping[tuple[int, int], np.ndarray]]


# ============================================================
# 能量
# ============================================================

def dirichlet_energy(g: Graph, x, undirected: bool = False) -> float:
    """
    Dirichlet 能量 E(x) = (1/N) Σ_i Σ_{j∈𝒩_i} a_ij ‖x_i − x_j‖²

    使用原始邻接权重。默认每条边按两个方向各算一次；
    undirected=True 时每条边只算一次，−∇E 恰为 rhs_gradient_flow。
    """
    X = as_features(x, g.node_count)
    energy = pairwise_sum(g.adjacency, X) / g.node_count
    return 0.5 * energy if undirected else energy


def tensor_dirichlet_energy(g: Graph, x, tensors: TensorInput) -> float:
    """
    张量型 Dirichlet 能量 (1/N) Σ_i Σ_{j∈𝒩_i} (x_i − x_j)ᵀ a_ij (x_i − x_j)

    tensors 可以是按图存储顺序排列的 (nnz, d, d) 数组，
    也可以是 (i, j) → d×d 矩阵的映射（只给一个方向时另一方向沿用同一矩阵）。
    张量不半正定时结果可能为负，原样返回。
    """
    X = as_features(x, g.node_count)
    d = X.shape[1]
    rows, cols = g.row_indices, g.indices

    if isinstance(tensors, Mapping):
        stack = np.empty((rows.size, d, d))
        for k, (i, j) in enumerate(zip(rows.tolist(), cols.tolist())):
            tensor = tensors.get((i, j), tensors.get((j, i)))
            if tensor is None:
                raise MissingExplicitEntryError(f"边 ({i}, {j}) 缺少连接张量")
            stack[k] = tensor
    else:
        stack = np.asarray(tensors, dtype=float)

    if stack.shape != (rows.size, d, d):
        raise DimensionMismatchError(f"连接张量形状 {stack.shape} 应为 {(rows.size, d, d)}")

    diff = X[rows] - X[cols]
    return float(np.einsum("ei,eij,ej->", diff, stack, diff)) / g.node_count


def mass_center(x) -> np.ndarray:
    """逐通道质心 x_c"""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X.mean(axis=0)


def energy_report(
    g: Graph, t: float, x, params: Optional[AcmpParams] = None, undirected: bool = False
) -> EnergyReport:
    """单个时刻的能量类诊断；params 为空或 α 非标量时 pseudo_gl 为空"""
    X = as_features(x, g.node_count)
    pseudo_gl = None
    if params is not None:
        try:
            pseudo_gl = pseudo_gl_energy(g, X, params, undirected=undirected)
        except ScalarAlphaRequiredError:
            pseudo_gl = None
    return EnergyReport(
        time=float(t),
        dirichlet=dirichlet_energy(g, X, undirected=undirected),
        pseudo_gl=pseudo_gl,
        norm_sq=float(np.sum(X * X)),
        mass_center=mass_center(X).tolist(),
    )


def energy_series(
    traj: Trajectory, g: Graph, params: Optional[AcmpParams] = None, undirected: bool = False
) -> list[EnergyReport]:
    """每个采样时刻一条 EnergyReport"""
    return [
        energy_report(g, t, state, params, undirected)
        for t, state in zip(traj.times, traj.states)
    ]


def energy_series_to_rows(reports: Sequence[EnergyReport]) -> tuple[list[str], list[list[float]]]:
    """转成 CSV 表头与数据行：t,dirichlet,pseudo_gl,norm_sq,mass_center_0..d-1"""
    dim = len(reports[0].mass_center) if reports else 0
    header = ["t", "dirichlet", "pseudo_gl", "norm_sq"] + [f"mass_center_{k}" for k in range(dim)]
    rows = [
        [r.time, r.dirichlet, float("nan") if r.pseudo_gl is None else r.pseudo_gl, r.norm_sq]
        + list(r.mass_center)
        for r in reports
    ]
    return header, rows


def sup_norm_series(traj: Trajectory) -> np.ndarray:
    """每个采样时刻的 max_i |x_i|"""
    states = traj.states.reshape(len(traj.times), -1)
    return np.max(np.abs(states), axis=1, initial=0.0)


def decay_rate(times, values) -> float:
    """
    对正值序列做 log 线性最小二乘，返回指数衰减率 r（values ≈ C·e^{−rt}）

    非正值（下溢到 0）不参与拟合。
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if np.count_nonzero(keep) < 2:
        raise InsufficientDataError("至少需要两个正值才能拟合衰减率")
    slope, _ = np.polyfit(t[keep], np.log(v[keep]), 1)
    return float(-slope)


def is_steady_state(rhs: RhsFunction, x, tol: float = config.STEADY_STATE_TOL) -> bool:
    """‖rhs(x)‖_∞ < tol"""
    return float(np.max(np.abs(rhs(np.asarray(x, dtype=float))), initial=0.0)) < tol


# ============================================================
# 分组统计
# ============================================================

def _split(partition, node_count: int) -> tuple[np.ndarray, np.ndarray]:
    groups = np.asarray(partition)
    if groups.shape != (node_count,):
        raise DimensionMismatchError(f"分组长度 {groups.shape} 与节点数 {node_count} 不一致")
    if not np.all((groups == 0) | (groups == 1)):
        raise ConfigError("分组只能取 0 或 1")
    return np.flatnonzero(groups == 0), np.flatnonzero(groups == 1)


def _group_moments(X: np.ndarray) -> tuple[float, float, Optional[list[float]]]:
    """(关于原点的二阶矩, 关于组心的二阶矩, 组心)"""
    if X.shape[0] == 0:
        return 0.0, 0.0, None
    center = X.mean(axis=0)
    m2 = float(np.mean(np.sum(X * X, axis=1)))
    m2_hat = float(np.mean(np.sum((X - center) ** 2, axis=1)))
    return m2, m2_hat, center.tolist()


def moments(x, partition) -> MomentReport:
    """M₂(V)、M₂(W) 以及 M̂₂ = M₂(V̂) + M₂(Ŵ)"""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    first, second = _split(partition, X.shape[0])
    m2_v, hat_v, center_1 = _group_moments(X[first])
    m2_w, hat_w, center_2 = _group_moments(X[second])
    return MomentReport(
        m2_v=m2_v, m2_w=m2_w, m2_hat=hat_v + hat_w, center_1=center_1, center_2=center_2
    )


def moment_series(traj: Trajectory, partition) -> list[MomentReport]:
    return [moments(state, partition) for state in traj.states]


def cross_group_energy(g: Graph, x, partition) -> float:
    """只统计跨组边的 Dirichlet 能量（双向求和，除以 N）"""
    X = as_features(x, g.node_count)
    groups = np.asarray(partition)
    _split(groups, g.node_count)
    rows, cols = g.row_indices, g.indices
    cross = groups[rows] != groups[cols]
    diff = X[rows[cross]] - X[cols[cross]]
    return float(np.sum(g.weights[cross] * np.sum(diff * diff, axis=1))) / g.node_count


def cross_group_energy_bound(g: Graph, x, partition, separation: float) -> tuple[float, float]:
    """
    跨组能量下界检查

    返回 (跨组能量, C²η₂/N)，其中 C 为测得的组间最小间距，
    η₂ 为跨组边权之和（每条边计一次）。组间分离成立时前者不小于后者。
    """
    groups = np.asarray(partition)
    rows, cols, weights = g.edge_arrays()
    eta_2 = float(np.sum(weights[groups[rows] != groups[cols]]))
    bound = separation ** 2 * eta_2 / g.node_count
    return cross_group_energy(g, x, groups), bound


# ============================================================
# 双簇聚集
# ============================================================

def _flocking_matrix(coupling: Union[CouplingModel, sp.spmatrix]) -> sp.csr_matrix:
    if not isinstance(coupling, CouplingModel):
        return sp.csr_matrix(coupling)
    if coupling.kind is not CouplingKind.EXPLICIT:
        raise ConfigError("双簇聚集条件只对显式耦合矩阵有定义")
    if coupling.has_edge_beta:
        return sp.csr_matrix(coupling.matrix - coupling.beta)
    matrix = coupling.matrix.copy()
    matrix.data = matrix.data - coupling.beta
    return matrix


def flocking_condition(
    coupling: Union[CouplingModel, sp.spmatrix],
    partition,
    alpha: float,
    delta: float,
    eta: float,
) -> FlockingCondition:
    """
    充分条件 α(S − D)·min{N₁, N₂} ≥ δ + η

    S 取组内存储项的最小值，D 取组间存储项取负后的最大值。
    组内出现非正项或组间出现正项时 structure_ok 为假，条件判为不成立。
    某组只有一个节点（没有组内项）时 S 按 0 处理。
    """
    coo = _flocking_matrix(coupling).tocoo()
    groups = np.asarray(partition)
    first, second = _split(groups, coo.shape[0])
    n1, n2 = first.size, second.size

    off_diagonal = coo.row != coo.col
    rows, cols, values = coo.row[off_diagonal], coo.col[off_diagonal], coo.data[off_diagonal]
    intra = groups[rows] == groups[cols]
    intra_values, inter_values = values[intra], values[~intra]

    structure_ok = bool(np.all(intra_values > 0) and np.all(inter_values <= 0))
    singleton = min(n1, n2) < 2
    s = 0.0 if singleton or intra_values.size == 0 else float(intra_values.min())
    d = float(np.max(-inter_values)) if inter_values.size else 0.0

    margin = alpha * (s - d) * min(n1, n2) - (delta + eta)
    holds = structure_ok and margin >= -1e-12 * max(1.0, delta + eta)
    logger.debug("双簇聚集条件: S=%g, D=%g, margin=%g, holds=%s", s, d, margin, holds)
    return FlockingCondition(
        holds=holds, margin=margin, s=s, d=d, n1=n1, n2=n2, structure_ok=structure_ok
    )


def bicluster_check(
    traj: Trajectory, partition, c_prime: float, t_check: Optional[float] = None
) -> FlockingVerdict:
    """
    在采样时刻上检查双簇聚集

    (i) 组内最大间距：对全部采样时刻取上确界；
    (ii) 组间最小间距：对 t ≥ t_check 的采样时刻取最小，须不小于 C′。
    两条都逐通道计算，所有通道都满足才算分离。t_check 默认取 0.8 倍终止时刻。
    """
    states = traj.states
    if states.ndim == 2:
        states = states[:, :, None]
    first, second = _split(partition, states.shape[1])
    if first.size == 0 or second.size == 0:
        raise ConfigError("双簇聚集检查要求两组都非空")
    if t_check is None:
        t_check = config.DEFAULT_T_CHECK_FRACTION * float(traj.times[-1])

    def spread(members: np.ndarray) -> float:
        block = states[:, members, :]
        return float(np.max(block.max(axis=1) - block.min(axis=1)))

    late = np.flatnonzero(traj.times >= t_check)
    dim = states.shape[2]
    if late.size == 0:
        per_channel = [float("nan")] * dim
    else:
        per_channel = []
        for channel in range(dim):
            a = states[late][:, first, channel]
            b = states[late][:, second, channel]
            per_channel.append(float(np.min(np.abs(a[:, :, None] - b[:, None, :]))))

    inter_min = float(np.min(per_channel)) if late.size else float("nan")
    separated = bool(late.size and all(v >= c_prime for v in per_channel))
    return FlockingVerdict(
        intra_spread_1=spread(first),
        intra_spread_2=spread(second),
        inter_min=inter_min,
        inter_min_per_channel=per_channel,
        separated=separated,
        c_prime=c_prime,
        t_check=float(t_check),
    )


# ============================================================
# 符号聚类
# ============================================================

@dataclass(frozen=True, eq=False)
class SignClusters:
    """
    节点到 {−1, +1}^d 角点的分配

    corner_index 的第 k 位为 1 表示第 k 个通道 ≥ 0（0 归到 +1）。
    patterns 是出现过的角点（按编号升序），每行取值 ±1。
    """
    corner_index: np.ndarray
    patterns: np.ndarray
    count: int


def sign_clusters(x) -> SignClusters:
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    bits = (X >= 0).astype(np.int64)
    corner_index = bits @ (1 << np.arange(X.shape[1], dtype=np.int64))
    present = np.unique(corner_index)
    patterns = np.where((present[:, None] >> np.arange(X.shape[1])) & 1, 1, -1)
    return SignClusters(corner_index=corner_index, patterns=patterns, count=int(present.size))


def corner_proximity(x, tol: float = 0.2) -> float:
    """特征落在某个 {±1}^d 角点 sup 范数 tol 邻域内的节点比例"""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    corners = np.where(X >= 0, 1.0, -1.0)
    close = np.max(np.abs(X - corners), axis=1) <= tol
    return float(np.mean(close))


def flocking_series(traj: Trajectory, partition) -> list[tuple[float, float, float, float]]:
    """每个采样时刻的 (t, 组 1 间距, 组 2 间距, 组间最小距离)，都取各通道中的最坏值"""
    states = traj.states
    if states.ndim == 2:
        states = states[:, :, None]
    first, second = _split(partition, states.shape[1])
    if first.size == 0 or second.size == 0:
        raise ConfigError("双簇聚集序列要求两组都非空")

    rows = []
    for t, X in zip(traj.times, states):
        a, b = X[first], X[second]
        spread_1 = float(np.max(a.max(axis=0) - a.min(axis=0)))
        spread_2 = float(np.max(b.max(axis=0) - b.min(axis=0)))
        inter = np.abs(a[:, None, :] - b[None, :, :]).min(axis=(0, 1))
        rows.append((float(t), spread_1, spread_2, float(inter.min())))
    return rows
