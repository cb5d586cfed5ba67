"""
图结构

不可变的稀疏对称加权图（CSR 存储），以及 Laplacian 作用、稠密谱分解、
两类随机图生成和同配率统计。

约定：
- 邻接矩阵对称，两侧存储的权重逐位相等；
- 不存自环（自作用只通过 GCN 的 d̂ = 1 + d 进入）；
- 权重为有限非负数，零权重的边直接丢弃（不构成邻居关系）。
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from acmp import config
from acmp.errors import (
    AsymmetricConflictError,
    DimensionMismatchError,
    DuplicateEdgeError,
    GraphError,
    GraphTooLargeForDenseSpectrumError,
    IndexOutOfRangeError,
    InvalidProbabilityError,
    MissingLabelsError,
    NegativeWeightError,
    SelfLoopError,
)
from acmp.logger import get_logger
from acmp.models import HomophilyReport, TwoClassGraphSpec

logger = get_logger(__name__)

EdgeTriple = tuple[int, int, float]
LabelInput = Union[Sequence[int], Mapping[int, int], np.ndarray]


# ============================================================
# 数据结构
# ============================================================

@dataclass(frozen=True, eq=False)
class Graph:
    """
    不可变加权无向图

    adjacency 是规范形式的 CSR 矩阵（行内列下标严格递增、无重复），
    其底层数组设为只读，可被任意多个线程并发读取。
    """
    node_count: int
    adjacency: sp.csr_matrix
    labels: Optional[np.ndarray] = None

    @property
    def offsets(self) -> np.ndarray:
        return self.adjacency.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.adjacency.indices

    @property
    def weights(self) -> np.ndarray:
        return self.adjacency.data

    @property
    def edge_count(self) -> int:
        """无向边条数"""
        return self.adjacency.nnz // 2

    @cached_property
    def degrees(self) -> np.ndarray:
        """加权度 d_i = Σ_j a_ij"""
        deg = np.asarray(self.adjacency.sum(axis=1)).ravel()
        deg.setflags(write=False)
        return deg

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        """邻居个数 |𝒩_i|"""
        counts = np.diff(self.offsets)
        counts.setflags(write=False)
        return counts

    @cached_property
    def row_indices(self) -> np.ndarray:
        """与 indices 对齐的行号，便于按存储顺序做向量化运算"""
        rows = np.repeat(np.arange(self.node_count), self.neighbor_counts)
        rows.setflags(write=False)
        return rows

    def neighbors(self, i: int) -> np.ndarray:
        """节点 i 的邻居（升序）"""
        return self.indices[self.offsets[i]:self.offsets[i + 1]]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """每条无向边只出现一次（i < j）的 (rows, cols, weights)"""
        rows = self.row_indices
        mask = rows < self.indices
        return rows[mask], self.indices[mask], self.weights[mask]

    def edges(self) -> list[EdgeTriple]:
        rows, cols, weights = self.edge_arrays()
        return [(int(i), int(j), float(w)) for i, j, w in zip(rows, cols, weights)]


@dataclass(frozen=True, eq=False)
class GraphSpectrum:
    """图 Laplacian ℒ = D − A 的谱常数"""
    lambda_min_positive: Optional[float]
    lambda_max: float
    degrees: np.ndarray
    eigenvalues: np.ndarray
    zero_multiplicity: int

    @property
    def is_connected(self) -> bool:
        return self.zero_multiplicity == 1


# ============================================================
# 内部工具
# ============================================================

def csr_from_triples(
    rows: np.ndarray, cols: np.ndarray, values: np.ndarray, node_count: int
) -> sp.csr_matrix:
    """
    由不含重复项的 (row, col, value) 直接拼出规范 CSR

    不经过 COO 转换，显式零会原样保留。
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    order = np.lexsort((cols, rows))
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=node_count), out=indptr[1:])
    return sp.csr_matrix(
        (values[order], cols[order], indptr), shape=(node_count, node_count)
    )


def _freeze(matrix: sp.csr_matrix) -> sp.csr_matrix:
    for arr in (matrix.data, matrix.indices, matrix.indptr):
        arr.setflags(write=False)
    return matrix


def _normalize_labels(labels: Optional[LabelInput], node_count: int) -> Optional[np.ndarray]:
    if labels is None:
        return None
    if isinstance(labels, Mapping):
        missing = [i for i in range(node_count) if i not in labels]
        if missing:
            raise MissingLabelsError(f"标签缺少 {len(missing)} 个节点，例如节点 {missing[0]}")
        arr = np.array([int(labels[i]) for i in range(node_count)], dtype=np.int64)
    else:
        arr = np.asarray(labels, dtype=np.int64)
        if arr.shape != (node_count,):
            raise MissingLabelsError(f"标签长度 {arr.shape} 与节点数 {node_count} 不一致")
    arr.setflags(write=False)
    return arr


def _graph_from_upper(
    rows: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray,
    node_count: int,
    labels: Optional[np.ndarray],
) -> Graph:
    """由 i < j 的边数组做对称闭包，两个方向写入同一个权重值"""
    all_rows = np.concatenate([rows, cols])
    all_cols = np.concatenate([cols, rows])
    all_weights = np.concatenate([weights, weights])
    adjacency = _freeze(csr_from_triples(all_rows, all_cols, all_weights, node_count))
    return Graph(node_count=node_count, adjacency=adjacency, labels=labels)


def as_features(x, node_count: int) -> np.ndarray:
    """
    把输入转为 (N, d) 的 float64 特征矩阵

    一维输入视为单通道 (N, 1)。
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != node_count:
        raise DimensionMismatchError(
            f"特征形状 {np.shape(x)} 与节点数 {node_count} 不匹配"
        )
    return arr


# ============================================================
# 构建与生成
# ============================================================

def build_graph(
    edges: Iterable[EdgeTriple],
    node_count: int,
    labels: Optional[LabelInput] = None,
) -> Graph:
    """
    由边列表构建图

    每条输入边 (i, j, w) 同时写入第 i 行和第 j 行；
    (i, j) 与 (j, i) 视为同一对节点，同权重重复给出报 DuplicateEdgeError，
    不同权重报 AsymmetricConflictError。
    """
    if node_count < 1:
        raise GraphError(f"节点数必须为正整数: {node_count}")

    seen: dict[tuple[int, int], float] = {}
    for edge in edges:
        i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise IndexOutOfRangeError(f"边 ({i}, {j}) 越界，节点数为 {node_count}")
        if not np.isfinite(w) or w < 0:
            raise NegativeWeightError(f"边 ({i}, {j}) 的权重非法: {w}")
        if i == j:
            raise SelfLoopError(f"节点 {i} 上不允许自环")
        key = (min(i, j), max(i, j))
        if key in seen:
            if seen[key] == w:
                raise DuplicateEdgeError(f"边 {key} 重复出现")
            raise AsymmetricConflictError(f"边 {key} 给出了不同权重 {seen[key]} 与 {w}")
        seen[key] = w

    kept = [(i, j, w) for (i, j), w in seen.items() if w > 0]
    if kept:
        rows, cols, weights = (np.array(col) for col in zip(*kept))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        weights = np.zeros(0)

    graph = _graph_from_upper(
        rows, cols, weights, node_count, _normalize_labels(labels, node_count)
    )
    logger.debug("构建图: N=%d, 边数=%d", node_count, graph.edge_count)
    return graph


def complete_graph(node_count: int, labels: Optional[LabelInput] = None) -> Graph:
    """单位权重完全图 K_N"""
    rows, cols = np.triu_indices(node_count, k=1)
    return _graph_from_upper(
        rows, cols, np.ones(rows.size), node_count, _normalize_labels(labels, node_count)
    )


def _check_two_class_spec(spec: TwoClassGraphSpec) -> None:
    p_in, p_out = spec.p_in, spec.p_out
    if not (np.isfinite(p_in) and np.isfinite(p_out) and 0.0 <= p_out <= p_in <= 1.0):
        raise InvalidProbabilityError(
            f"需要 0 ≤ p_out ≤ p_in ≤ 1，实际 p_in={p_in}, p_out={p_out}"
        )


def generate_two_class_graph(
    spec: TwoClassGraphSpec, seed: Optional[int] = None
) -> tuple[Graph, np.ndarray]:
    """
    生成两类随机图及其正态特征

    前 ⌊n/2⌋ 个节点属于类 0，其余属于类 1。同类节点以 p_in、异类以 p_out
    独立连边（单位权重），特征按类取 N(μ_c, σ²) 独立采样。

    随机数：PCG64 生成器，种子序列拆成两个子流：
    第 0 个子流只用于拓扑（按 np.triu_indices 顺序逐对抽样），
    第 1 个子流只用于特征。因此改变特征维数不影响拓扑。
    """
    _check_two_class_spec(spec)
    resolved = spec.seed if spec.seed is not None else (
        seed if seed is not None else config.DEFAULT_SEED
    )
    topology_seq, feature_seq = np.random.SeedSequence(resolved).spawn(2)
    topology_rng = np.random.default_rng(topology_seq)
    feature_rng = np.random.default_rng(feature_seq)

    n = spec.n
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2:] = 1

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    connected = topology_rng.random(iu.size) < prob
    rows, cols = iu[connected], ju[connected]

    means = np.asarray(spec.means, dtype=float)
    features = means[labels][:, None] + spec.sigma * feature_rng.standard_normal((n, spec.dim))

    labels.setflags(write=False)
    graph = _graph_from_upper(rows, cols, np.ones(rows.size), n, labels)
    logger.info(
        "生成两类随机图: N=%d, 边数=%d, p_in=%.3f, p_out=%.3f, seed=%d",
        n, graph.edge_count, spec.p_in, spec.p_out, resolved,
    )
    return graph, features


# ============================================================
# 线性代数
# ============================================================

def edge_flux(matrix: sp.csr_matrix, X: np.ndarray) -> np.ndarray:
    """
    第 i 行为 Σ_j m_ij (x_j − x_i)，逐通道

    按存储项逐条求差再按行累加，常数输入得到精确的零。
    """
    n = matrix.shape[0]
    counts = np.diff(matrix.indptr)
    rows = np.repeat(np.arange(n), counts)
    flux = matrix.data[:, None] * (X[matrix.indices] - X[rows])
    gather = sp.csr_matrix(
        (np.ones(rows.size), np.arange(rows.size), matrix.indptr), shape=(n, rows.size)
    )
    return gather @ flux


def laplacian_apply(g: Graph, x) -> np.ndarray:
    """计算 (D − A)x：第 i 行为 d_i·x_i − Σ_j a_ij·x_j = Σ_j a_ij (x_i − x_j)（逐通道）"""
    X = as_features(x, g.node_count)
    return -edge_flux(g.adjacency, X)


def spectrum(g: Graph, cap: Optional[int] = None) -> GraphSpectrum:
    """
    稠密对称特征分解求 ℒ = D − A 的谱常数

    最小正特征值取第一个超过 1e-9·λ_max 的特征值；
    没有正特征值（无边图）时 lambda_min_positive 为 None。
    """
    cap = config.SPECTRAL_CAP if cap is None else cap
    if g.node_count > cap:
        logger.warning("拒绝稠密谱分解: N=%d 超过上限 %d", g.node_count, cap)
        raise GraphTooLargeForDenseSpectrumError(
            f"节点数 {g.node_count} 超过稠密谱分解上限 {cap}"
        )

    laplacian = np.diag(g.degrees) - g.adjacency.toarray()
    eigenvalues = scipy.linalg.eigvalsh(laplacian)
    lambda_max = max(float(eigenvalues[-1]), 0.0)
    positive = eigenvalues[eigenvalues > config.ZERO_EIGENVALUE_RTOL * lambda_max]
    lambda_min_positive = float(positive[0]) if positive.size else None

    return GraphSpectrum(
        lambda_min_positive=lambda_min_positive,
        lambda_max=lambda_max,
        degrees=g.degrees,
        eigenvalues=eigenvalues,
        zero_multiplicity=int(g.node_count - positive.size),
    )


# ============================================================
# 同配率
# ============================================================

def homophily_report(g: Graph) -> HomophilyReport:
    """
    同配率：各节点同标签邻居比例的平均

    孤立节点的比例是 0/0，不计入平均，数量单独报告。
    """
    if g.labels is None:
        raise MissingLabelsError("计算同配率需要节点标签")

    rows = g.row_indices
    same = (g.labels[rows] == g.labels[g.indices]).astype(float)
    same_counts = np.bincount(rows, weights=same, minlength=g.node_count)
    counts = g.neighbor_counts
    has_neighbors = counts > 0
    isolated = int(g.node_count - has_neighbors.sum())

    if isolated:
        logger.warning("同配率计算排除了 %d 个孤立节点", isolated)
    if not has_neighbors.any():
        level = float("nan")
    else:
        level = float(np.mean(same_counts[has_neighbors] / counts[has_neighbors]))

    return HomophilyReport(
        level=level,
        counted_nodes=int(has_neighbors.sum()),
        isolated_nodes=isolated,
    )


def homophily_level(g: Graph) -> float:
    """同配率数值（见 homophily_report）"""
    return homophily_report(g).level
