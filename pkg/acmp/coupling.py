"""
耦合系数

给出成对作用系数 a(x_i, x_j) 以及有效耦合 a(x_i, x_j) − β：
- GCN 固定系数：只依赖拓扑，a_ij / √(d̂_i d̂_j)，d̂_i = 1 + Σ_j a_ji；
- 注意力系数：对 𝒩_i ∪ {i} 做 softmax，按行归一化，一般不对称；
- 显式矩阵：直接给定（可带符号），用于双簇聚集构造和从文件加载。

系数表统一用 CSR 表示。由图导出的系数表与图共享稀疏模式（含显式零）。
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from acmp import config
from acmp.errors import (
    AsymmetricConflictError,
    ConfigError,
    DimensionMismatchError,
    InvalidStrengthError,
    MissingExplicitEntryError,
)
from acmp.graph import Graph, as_features, csr_from_triples
from acmp.logger import get_logger

logger = get_logger(__name__)

BetaInput = Union[float, sp.spmatrix, np.ndarray]


class CouplingKind(str, Enum):
    """耦合类型"""
    GCN_FIXED = "gcn"
    ATTENTION = "attention"
    EXPLICIT = "explicit"


# ============================================================
# 数据结构
# ============================================================

@dataclass(frozen=True, eq=False)
class AttentionParams:
    """
    单头注意力参数（不训练）

    theta: (d, d′) 投影矩阵 Θ
    attn_vector: 长度 2·d′ 的注意力向量 𝐚，前半作用于 Θx_i，后半作用于 Θx_j
    """
    theta: np.ndarray
    attn_vector: np.ndarray
    leaky_slope: float = config.DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        attn = np.asarray(self.attn_vector, dtype=float).ravel()
        if theta.shape[1] < 1 or attn.size != 2 * theta.shape[1]:
            raise DimensionMismatchError(
                f"注意力向量长度 {attn.size} 应为 2·d′ = {2 * theta.shape[1]}"
            )
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(attn))):
            raise ConfigError("注意力参数必须是有限数")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "attn_vector", attn)

    @property
    def feature_dim(self) -> int:
        return self.theta.shape[0]

    @property
    def projection_dim(self) -> int:
        return self.theta.shape[1]


@dataclass(frozen=True, eq=False)
class CouplingModel:
    """
    有效耦合规则

    beta 可以是标量 β ≥ 0，也可以是逐边的 β_ij 矩阵（仅 EXPLICIT 允许）。
    """
    kind: CouplingKind
    beta: BetaInput = 0.0
    attention: Optional[AttentionParams] = None
    matrix: Optional[sp.csr_matrix] = None

    def __post_init__(self):
        if sp.issparse(self.beta) or isinstance(self.beta, np.ndarray):
            if self.kind is not CouplingKind.EXPLICIT:
                raise ConfigError("逐边 β_ij 只能用于显式耦合矩阵")
            object.__setattr__(self, "beta", _canonical_matrix(self.beta))
        else:
            beta = float(self.beta)
            if not np.isfinite(beta) or beta < 0:
                raise ConfigError(f"β 必须是非负有限数: {beta}")
            object.__setattr__(self, "beta", beta)

        if self.kind is CouplingKind.ATTENTION and self.attention is None:
            raise ConfigError("注意力耦合缺少 AttentionParams")
        if self.kind is CouplingKind.EXPLICIT and self.matrix is None:
            raise ConfigError("显式耦合缺少系数矩阵")

    @property
    def is_static(self) -> bool:
        """系数是否与特征无关（可只算一次并缓存）"""
        return self.kind is not CouplingKind.ATTENTION

    @property
    def is_symmetric(self) -> bool:
        return self.kind is not CouplingKind.ATTENTION

    @property
    def has_edge_beta(self) -> bool:
        return sp.issparse(self.beta)


# ============================================================
# 构造函数
# ============================================================

def _canonical_matrix(matrix) -> sp.csr_matrix:
    """
    转成去掉对角线的规范 CSR

    稠密输入的所有非对角位置都视为“已定义”（含零）；
    稀疏输入只有存储项视为已定义。
    """
    if sp.issparse(matrix):
        coo = sp.coo_matrix(matrix)
        coo.sum_duplicates()
        rows, cols, values = coo.row, coo.col, coo.data
        shape = coo.shape
    else:
        dense = np.asarray(matrix, dtype=float)
        if dense.ndim != 2:
            raise DimensionMismatchError(f"耦合矩阵必须是二维的: {dense.shape}")
        rows, cols = np.nonzero(~np.eye(dense.shape[0], dense.shape[1], dtype=bool))
        values = dense[rows, cols]
        shape = dense.shape

    n_rows, n_cols = shape
    if n_rows != n_cols:
        raise DimensionMismatchError(f"耦合矩阵必须是方阵: {shape}")
    off_diagonal = rows != cols
    values = np.asarray(values, dtype=float)[off_diagonal]
    if not np.all(np.isfinite(values)):
        raise ConfigError("耦合矩阵含非有限值")
    return csr_from_triples(rows[off_diagonal], cols[off_diagonal], values, n_rows)


def gcn_coupling(beta: float = 0.0) -> CouplingModel:
    return CouplingModel(kind=CouplingKind.GCN_FIXED, beta=beta)


def attention_coupling(params: AttentionParams, beta: float = 0.0) -> CouplingModel:
    return CouplingModel(kind=CouplingKind.ATTENTION, beta=beta, attention=params)


def explicit_coupling(matrix, beta: BetaInput = 0.0) -> CouplingModel:
    """显式系数矩阵（必须对称）"""
    canonical = _canonical_matrix(matrix)
    asymmetry = abs(canonical - canonical.T)
    if asymmetry.nnz and asymmetry.max() > 0:
        raise AsymmetricConflictError("显式耦合矩阵不对称")
    return CouplingModel(kind=CouplingKind.EXPLICIT, beta=beta, matrix=canonical)


def adjacency_coupling(g: Graph, beta: float = 0.0) -> CouplingModel:
    """直接以邻接权重 a_ij 作为系数（GRAND 原始形式）"""
    return explicit_coupling(g.adjacency, beta=beta)


def random_attention_params(
    feature_dim: int,
    projection_dim: int,
    seed: Optional[int] = None,
    leaky_slope: float = config.DEFAULT_LEAKY_SLOPE,
) -> AttentionParams:
    """按 N(0, 1/d′) 随机初始化 Θ 和 𝐚"""
    rng = np.random.default_rng(config.DEFAULT_SEED if seed is None else seed)
    scale = 1.0 / np.sqrt(projection_dim)
    theta = scale * rng.standard_normal((feature_dim, projection_dim))
    attn = scale * rng.standard_normal(2 * projection_dim)
    return AttentionParams(theta=theta, attn_vector=attn, leaky_slope=leaky_slope)


def two_group_partition(n1: int, n2: int) -> np.ndarray:
    """前 n1 个节点为组 0，后 n2 个为组 1"""
    return np.repeat(np.array([0, 1], dtype=np.int64), [n1, n2])


def flocking_partition_coupling(n1: int, n2: int, s: float, d: float) -> CouplingModel:
    """
    双簇耦合构造：组内两两 +s（吸引），组间两两 −d（排斥）

    矩阵定义在全部非对角位置上（d = 0 时组间存显式零），
    配合完全图 K_{n1+n2} 使用。
    """
    if n1 < 1 or n2 < 1:
        raise InvalidStrengthError(f"两组节点数都必须 ≥ 1: n1={n1}, n2={n2}")
    if not (np.isfinite(s) and s > 0):
        raise InvalidStrengthError(f"组内强度 s 必须为正: {s}")
    if not (np.isfinite(d) and d >= 0):
        raise InvalidStrengthError(f"组间强度 d 必须非负: {d}")

    groups = two_group_partition(n1, n2)
    n = n1 + n2
    rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    values = np.where(groups[rows] == groups[cols], float(s), -float(d))
    model = explicit_coupling(csr_from_triples(rows, cols, values, n))
    logger.debug("双簇耦合: n1=%d, n2=%d, s=%g, d=%g", n1, n2, s, d)
    return model


# ============================================================
# 系数计算
# ============================================================

def _pattern_matrix(g: Graph, data: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix((data, g.indices, g.offsets), shape=(g.node_count, g.node_count))


def align_to_graph(g: Graph, matrix: sp.csr_matrix) -> np.ndarray:
    """
    取出矩阵在图每个存储位置上的值（按图的存储顺序）

    图上某条边在矩阵中没有存储项时报 MissingExplicitEntryError。
    """
    n = g.node_count
    if matrix.shape != (n, n):
        raise DimensionMismatchError(f"耦合矩阵形状 {matrix.shape} 与节点数 {n} 不一致")
    matrix_rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(matrix.indptr))
    matrix_keys = matrix_rows * n + matrix.indices
    graph_keys = g.row_indices.astype(np.int64) * n + g.indices

    pos = np.searchsorted(matrix_keys, graph_keys)
    found = pos < matrix_keys.size
    found[found] = matrix_keys[pos[found]] == graph_keys[found]
    if not np.all(found):
        missing = int(np.flatnonzero(~found)[0])
        raise MissingExplicitEntryError(
            f"显式矩阵缺少边 ({int(g.row_indices[missing])}, {int(g.indices[missing])}) 的系数"
        )
    return matrix.data[pos]


def gcn_coefficients(g: Graph) -> sp.csr_matrix:
    """GCN 系数 a_ij / √(d̂_i d̂_j)，d̂_i = 1 + Σ_j a_ji"""
    d_hat = 1.0 + g.degrees
    data = g.weights / np.sqrt(d_hat[g.row_indices] * d_hat[g.indices])
    return _pattern_matrix(g, data)


def _leaky_relu(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0, z, slope * z)


def _attention_weights(
    g: Graph, X: np.ndarray, params: AttentionParams
) -> tuple[np.ndarray, np.ndarray]:
    """返回 (边上权重, 自环权重)，两者合起来每行和为 1"""
    if X.shape[1] != params.feature_dim:
        raise DimensionMismatchError(
            f"特征维数 {X.shape[1]} 与 Θ 的输入维数 {params.feature_dim} 不一致"
        )
    projected = X @ params.theta
    dp = params.projection_dim
    source = projected @ params.attn_vector[:dp]
    target = projected @ params.attn_vector[dp:]

    rows, cols = g.row_indices, g.indices
    edge_logits = _leaky_relu(source[rows] + target[cols], params.leaky_slope)
    self_logits = _leaky_relu(source + target, params.leaky_slope)

    # 按行减去最大值后再取指数
    row_max = self_logits.copy()
    np.maximum.at(row_max, rows, edge_logits)
    edge_exp = np.exp(edge_logits - row_max[rows])
    self_exp = np.exp(self_logits - row_max)
    denom = self_exp + np.bincount(rows, weights=edge_exp, minlength=g.node_count)
    return edge_exp / denom[rows], self_exp / denom


def attention_coefficients(g: Graph, x, params: AttentionParams) -> sp.csr_matrix:
    """
    注意力系数 α_ij = softmax_{j ∈ 𝒩_i ∪ {i}} LeakyReLU(𝐚ᵀ[Θx_i ∥ Θx_j])

    结果含对角线（自身权重），每行和为 1，一般不对称。
    """
    X = as_features(x, g.node_count)
    edge_w, self_w = _attention_weights(g, X, params)
    diag = np.arange(g.node_count)
    return csr_from_triples(
        np.concatenate([g.row_indices, diag]),
        np.concatenate([g.indices, diag]),
        np.concatenate([edge_w, self_w]),
        g.node_count,
    )


def base_edge_coefficients(model: CouplingModel, g: Graph, x=None) -> np.ndarray:
    """图每个存储位置上的基础系数 a(x_i, x_j)（未减 β）"""
    if model.kind is CouplingKind.GCN_FIXED:
        return gcn_coefficients(g).data
    if model.kind is CouplingKind.ATTENTION:
        if x is None:
            raise DimensionMismatchError("注意力系数需要当前特征")
        edge_w, _ = _attention_weights(g, as_features(x, g.node_count), model.attention)
        return edge_w
    return align_to_graph(g, model.matrix)


def effective_edge_coefficients(model: CouplingModel, g: Graph, x=None) -> np.ndarray:
    """图每个存储位置上的 a(x_i, x_j) − β_ij"""
    base = base_edge_coefficients(model, g, x)
    if model.has_edge_beta:
        return base - align_to_graph(g, model.beta)
    return base - model.beta


def effective_coupling(model: CouplingModel, g: Graph, x=None) -> sp.csr_matrix:
    """
    有效耦合表 a(x_i, x_j) − β

    正值吸引、负值排斥、零表示无作用。β 只作用在图的边上。
    """
    return _pattern_matrix(g, effective_edge_coefficients(model, g, x))
