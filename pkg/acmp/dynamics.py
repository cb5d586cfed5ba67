"""
右端项与能量泛函

所有 rhs_* 都是 (图, 状态, 参数) 的纯函数，返回与状态同形的 (N, d) 时间导数。
扩散项统一写成 Σ_j c_ij (x_j − x_i)，按系数表的存储项逐条求差后按行累加，其中 C 是与图
同稀疏模式的系数表；非耦合部分（α、δ、势函数）都逐通道作用。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from acmp import config
from acmp.coupling import (
    CouplingModel,
    adjacency_coupling,
    base_edge_coefficients,
    effective_coupling,
    gcn_coupling,
)
from acmp.errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidPotentialError,
    ScalarAlphaRequiredError,
)
from acmp.graph import Graph, as_features, edge_flux, laplacian_apply
from acmp.logger import get_logger
from acmp.models import ModelKind

logger = get_logger(__name__)

ChannelInput = Union[float, Sequence[float], np.ndarray]
RhsFunction = Callable[[np.ndarray], np.ndarray]


# ============================================================
# 势函数
# ============================================================

class PotentialVariant(ABC):
    """
    势阱抽象基类

    force 返回单位强度下的反应力 f(x)，potential 返回满足 W′ = −f 的势 W(x)，
    两者都逐元素作用，强度 δ 由调用方乘上。
    """

    @abstractmethod
    def force(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def potential(self, x: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class DoubleWell(PotentialVariant):
    """W(x) = (1 − x²)² / 4，稳定点 ±1，0 不稳定"""

    def force(self, x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 - x * x)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.25 * (1.0 - x * x) ** 2


@dataclass(frozen=True)
class PolynomialWells(PotentialVariant):
    """
    多项式多势阱：f(x) = −∏_m (x − r_m)

    根的个数为奇数且严格递增，下标为偶数的根（含最外两侧）是稳定点。
    势取 ∏(x − r_m) 的原函数，平移到稳定点上的最小值为 0；
    roots = (−1, 0, 1) 时与 DoubleWell 完全一致。
    """
    roots: tuple[float, ...]

    def __post_init__(self):
        roots = tuple(float(r) for r in self.roots)
        if len(roots) % 2 != 1:
            raise InvalidPotentialError(f"多项式势阱需要奇数个根，实际 {len(roots)} 个")
        if not all(np.isfinite(roots)):
            raise InvalidPotentialError("多项式势阱的根必须是有限数")
        if any(b <= a for a, b in zip(roots, roots[1:])):
            raise InvalidPotentialError(f"多项式势阱的根必须严格递增: {roots}")
        object.__setattr__(self, "roots", roots)

    @property
    def _product(self) -> Polynomial:
        return Polynomial.fromroots(self.roots)

    def force(self, x):
        return -self._product(np.asarray(x, dtype=float))

    def potential(self, x):
        antiderivative = self._product.integ()
        floor = min(antiderivative(r) for r in self.roots[::2])
        return antiderivative(np.asarray(x, dtype=float)) - floor


@dataclass(frozen=True)
class SineWells(PotentialVariant):
    """
    正弦多势阱：f(x) = sin((3/2 + l)πx + π/2) = cos(kx)，k = (3/2 + l)π

    在 [−1, 1] 上有 l + 2 个稳定零点（两个端点恰有一个稳定）。
    """
    wells: int = 0

    def __post_init__(self):
        if int(self.wells) != self.wells or self.wells < 0:
            raise InvalidPotentialError(f"正弦势阱的 l 必须是非负整数: {self.wells}")

    @property
    def wavenumber(self) -> float:
        return (1.5 + self.wells) * np.pi

    def force(self, x):
        return np.sin(self.wavenumber * np.asarray(x, dtype=float) + 0.5 * np.pi)

    def potential(self, x):
        k = self.wavenumber
        return (1.0 - np.sin(k * np.asarray(x, dtype=float))) / k


def potential_force(v: PotentialVariant, x, delta: float) -> np.ndarray:
    """反应力 δ·f(x)，逐元素"""
    return delta * v.force(x)


def stable_equilibria(
    v: PotentialVariant,
    lo: float = -1.0,
    hi: float = 1.0,
    samples: int = config.EQUILIBRIUM_GRID_SAMPLES,
) -> int:
    """
    在 [lo, hi] 的均匀网格上数稳定零点个数

    相邻格点力由正变负记一个；恰好落在格点上的零点（|f| ≤ 1e−9·max|f|）
    在该处差分斜率为负时记一个。
    """
    grid = np.linspace(lo, hi, samples)
    values = np.asarray(v.force(grid), dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        return 0
    values = np.where(np.abs(values) <= 1e-9 * scale, 0.0, values)
    signs = np.sign(values)

    crossings = int(np.count_nonzero((signs[:-1] > 0) & (signs[1:] < 0)))
    slopes = np.gradient(values, grid)
    exact = int(np.count_nonzero((signs == 0) & (slopes < 0)))
    return crossings + exact


def make_potential(kind: str, roots: Sequence[float] = (), wells: int = 0) -> PotentialVariant:
    """由配置字段构造势函数"""
    if kind == "double_well":
        return DoubleWell()
    if kind == "polynomial":
        return PolynomialWells(tuple(roots))
    if kind == "sine":
        return SineWells(wells)
    raise InvalidPotentialError(f"未知势函数类型: {kind}")


# ============================================================
# 参数
# ============================================================

def _channel_vector(value: ChannelInput, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"{name} 必须是标量或一维向量")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError(f"{name} 必须是非负有限数: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AcmpParams:
    """
    ACMP 右端项的完整参数

    alpha / delta 为标量时对所有通道广播，为向量时长度必须等于特征维数。
    """
    coupling: CouplingModel
    alpha: ChannelInput = 1.0
    delta: ChannelInput = 1.0
    potential: PotentialVariant = field(default_factory=DoubleWell)
    trapping: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", _channel_vector(self.alpha, "alpha"))
        object.__setattr__(self, "delta", _channel_vector(self.delta, "delta"))

    def channel_alpha(self, dim: int) -> np.ndarray:
        return _broadcast(self.alpha, dim, "alpha")

    def channel_delta(self, dim: int) -> np.ndarray:
        return _broadcast(self.delta, dim, "delta")

    @property
    def scalar_alpha(self) -> float:
        """α 的标量值，向量 α 各分量不全相等时报错"""
        if np.any(self.alpha != self.alpha[0]):
            raise ScalarAlphaRequiredError(f"伪 Ginzburg-Landau 能量需要标量 α，实际 {self.alpha}")
        return float(self.alpha[0])


def _broadcast(vec: np.ndarray, dim: int, name: str) -> np.ndarray:
    if vec.size == 1:
        return np.full(dim, vec[0])
    if vec.size != dim:
        raise DimensionMismatchError(f"{name} 长度 {vec.size} 与特征维数 {dim} 不一致")
    return vec


# ============================================================
# 右端项
# ============================================================

def diffusion_term(coefficients: sp.csr_matrix, X: np.ndarray) -> np.ndarray:
    """第 i 行为 Σ_j c_ij (x_j − x_i)"""
    return edge_flux(coefficients, X)


def _reaction(X: np.ndarray, params: AcmpParams) -> np.ndarray:
    return params.channel_delta(X.shape[1]) * params.potential.force(X)


def rhs_acmp(g: Graph, x, params: AcmpParams, coefficients: Optional[sp.csr_matrix] = None) -> np.ndarray:
    """
    ACMP 右端项

    ẋ_i = α ⊙ Σ_{j∈𝒩_i} (a(x_i, x_j) − β)(x_j − x_i) + δ ⊙ f(x_i)

    params.trapping 为真时转交 rhs_trapping。
    coefficients 可传入预先算好的有效耦合表（静态耦合的缓存）。
    """
    if params.trapping:
        return rhs_trapping(g, x, params, coefficients)
    X = as_features(x, g.node_count)
    if coefficients is None:
        coefficients = effective_coupling(params.coupling, g, X)
    alpha = params.channel_alpha(X.shape[1])
    return alpha * diffusion_term(coefficients, X) + _reaction(X, params)


def rhs_acmp_gcn(g: Graph, x, params: AcmpParams) -> np.ndarray:
    """耦合固定为 GCN 系数的 ACMP（沿用 params 中的 β）"""
    gcn_params = replace(params, coupling=gcn_coupling(beta=params.coupling.beta))
    return rhs_acmp(g, x, gcn_params)


def rhs_grand(g: Graph, x, coupling: Optional[CouplingModel] = None) -> np.ndarray:
    """
    纯扩散 ẋ_i = Σ_{j∈𝒩_i} a(x_i, x_j)(x_j − x_i)

    coupling 为空时直接用邻接权重；β 不参与。
    """
    X = as_features(x, g.node_count)
    if coupling is None:
        table = g.adjacency
    else:
        data = base_edge_coefficients(coupling, g, X)
        table = sp.csr_matrix((data, g.indices, g.offsets), shape=g.adjacency.shape)
    return diffusion_term(table, X)


def rhs_gradient_flow(g: Graph, x) -> np.ndarray:
    """Dirichlet 能量的梯度流 (2/N)·Σ_j a_ij (x_j − x_i)"""
    return -(2.0 / g.node_count) * laplacian_apply(g, x)


def rhs_trapping(g: Graph, x, params: AcmpParams, coefficients: Optional[sp.csr_matrix] = None) -> np.ndarray:
    """扩散项逐通道乘 (1 − x_i²)²，使 ±1 成为吸收态"""
    X = as_features(x, g.node_count)
    if coefficients is None:
        coefficients = effective_coupling(params.coupling, g, X)
    alpha = params.channel_alpha(X.shape[1])
    damping = (1.0 - X * X) ** 2
    return alpha * diffusion_term(coefficients, X) * damping + _reaction(X, params)


# ============================================================
# 能量
# ============================================================

def pairwise_sum(table: sp.csr_matrix, X: np.ndarray) -> float:
    """Σ over stored (i, j) of c_ij ‖x_i − x_j‖²（双向各算一次）"""
    coo = table.tocoo()
    diff = X[coo.row] - X[coo.col]
    return float(np.sum(coo.data * np.einsum("ij,ij->i", diff, diff)))


def pseudo_gl_energy(g: Graph, x, params: AcmpParams, undirected: bool = False) -> float:
    """
    伪 Ginzburg-Landau 能量 Φ(x) = ½ α Σ_i Σ_{j∈𝒩_i} (a_ij − β)‖x_i − x_j‖² + Σ_i δ·W(x_i)

    默认按字面做双向求和；undirected=True 时每条边只算一次，
    此时 −∇Φ 恰好等于 rhs_acmp（对称静态耦合、标量 α）。
    耦合有排斥时二次型可以不定，能量可为负。
    """
    alpha = params.scalar_alpha
    X = as_features(x, g.node_count)
    table = effective_coupling(params.coupling, g, X)
    interaction = 0.5 * alpha * pairwise_sum(table, X)
    if undirected:
        interaction *= 0.5
    delta = params.channel_delta(X.shape[1])
    wells = float(np.sum(delta * params.potential.potential(X)))
    return interaction + wells


# ============================================================
# 模型装配
# ============================================================

class AcmpSystem:
    """
    把某种模型装配成积分器可用的右端项 x ↦ ẋ

    静态耦合（GCN、显式矩阵、邻接）的系数表在构造时算一次并缓存；
    注意力耦合在每次求值时重算。
    """

    def __init__(self, g: Graph, model: ModelKind, params: Optional[AcmpParams] = None):
        self.graph = g
        self.model = ModelKind(model)
        self.params = params
        self._coefficients: Optional[sp.csr_matrix] = None

        if self.model in (ModelKind.GRAND, ModelKind.GRADIENT_FLOW):
            return
        if params is None:
            raise ConfigError(f"模型 {self.model.value} 需要 AcmpParams")
        if self.model is ModelKind.ACMP_GCN:
            self.params = replace(params, coupling=gcn_coupling(beta=params.coupling.beta))
        elif self.model is ModelKind.ACMP_TRAP:
            self.params = replace(params, trapping=True)
        elif self.model is ModelKind.ACMP_ATTN and params.coupling.is_static:
            raise ConfigError("acmp-attn 模型需要注意力耦合")
        elif self.model is ModelKind.ACMP_EXPLICIT and params.coupling.matrix is None:
            raise ConfigError("acmp-explicit 模型需要显式耦合矩阵")

        if self.params.coupling.is_static:
            self._coefficients = effective_coupling(self.params.coupling, g)
        logger.debug(
            "装配右端项: model=%s, 缓存系数=%s", self.model.value, self._coefficients is not None
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.model is ModelKind.GRAND:
            return rhs_grand(self.graph, x)
        if self.model is ModelKind.GRADIENT_FLOW:
            return rhs_gradient_flow(self.graph, x)
        return rhs_acmp(self.graph, x, self.params, self._coefficients)


def grand_params(g: Graph) -> AcmpParams:
    """GRAND 的等价 ACMP 参数：邻接系数、β = 0、δ = 0、α = 1"""
    return AcmpParams(coupling=adjacency_coupling(g), alpha=1.0, delta=0.0)
