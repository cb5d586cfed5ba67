"""
ACMP 数据模型

定义实验配置（命令行 / JSON 文件）与各类诊断报告的 Schema。
含数组的数值容器（Graph、Trajectory 等）是各自模块里的 frozen dataclass，不在这里。
"""

from enum import Enum
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from acmp import config


# ============================================================
# 核心枚举
# ============================================================

class SolverMethod(str, Enum):
    """积分方法"""
    EULER = "euler"
    MIDPOINT = "midpoint"
    RK4 = "rk4"
    DOPRI5 = "dopri5"


class ModelKind(str, Enum):
    """右端项模型"""
    GRAND = "grand"                  # 纯扩散，权重取邻接矩阵
    ACMP_GCN = "acmp-gcn"            # GCN 系数 + β + Allen-Cahn 项
    ACMP_ATTN = "acmp-attn"          # 注意力系数（每次求值重算）
    ACMP_TRAP = "acmp-trap"          # 势阱附近抑制扩散的变体
    ACMP_EXPLICIT = "acmp-explicit"  # 显式耦合矩阵（文件或双簇构造）
    GRADIENT_FLOW = "gradient-flow"  # Dirichlet 能量的梯度流


class PotentialKind(str, Enum):
    """势函数类型"""
    DOUBLE_WELL = "double_well"
    POLYNOMIAL = "polynomial"
    SINE = "sine"


class InitialKind(str, Enum):
    """初值类型"""
    GRAPH = "graph"                  # 使用图自带特征（生成器或特征文件）
    UNIFORM = "uniform"              # [low, high] 上均匀分布
    GROUP_CENTERS = "group_centers"  # 每个标签组围绕一个中心


class SeriesKind(str, Enum):
    """可输出的序列"""
    TRAJECTORY = "trajectory"
    ENERGY = "energy"
    CLUSTERS = "clusters"
    FLOCKING = "flocking"


# ============================================================
# 实验配置
# ============================================================

class _StrictModel(BaseModel):
    """所有配置模型拒绝未知字段"""
    model_config = ConfigDict(extra="forbid")


class TwoClassGraphSpec(_StrictModel):
    """两类随机图 + 正态特征的生成参数"""
    n: int = Field(ge=1, description="节点数")
    p_in: float = Field(description="同类节点连边概率")
    p_out: float = Field(description="异类节点连边概率")
    means: tuple[float, float] = Field(default=(-0.5, 0.5), description="两类特征均值")
    sigma: float = Field(default=2.0, ge=0.0, description="特征标准差")
    dim: int = Field(default=2, ge=1, description="特征维数")
    seed: Optional[int] = Field(default=None, description="随机种子（为空时用实验种子）")


class GraphFileRef(_StrictModel):
    """从边列表文件读取图"""
    edges: str = Field(description="边列表文件路径（i j weight）")
    labels: Optional[str] = Field(default=None, description="标签文件路径（node_id class_id）")
    features: Optional[str] = Field(default=None, description="特征文件路径")
    node_count: Optional[int] = Field(default=None, ge=1, description="节点数（为空时从文件推断）")


class SolverSpec(_StrictModel):
    """积分器参数"""
    method: SolverMethod = Field(default=SolverMethod.DOPRI5, description="积分方法")
    step: float = Field(default=1e-2, gt=0.0, description="定步长方法的步长 h")
    atol: float = Field(default=config.DEFAULT_ATOL, gt=0.0, description="绝对容差")
    rtol: float = Field(default=config.DEFAULT_RTOL, gt=0.0, description="相对容差")
    t_end: float = Field(default=10.0, gt=0.0, description="终止时间 T")
    sample_every: Optional[float] = Field(default=None, gt=0.0, description="采样间隔（为空只记录首末）")
    max_steps: int = Field(default=config.DEFAULT_MAX_STEPS, ge=1, description="步数上限")
    safety: float = Field(default=config.STEP_SAFETY, gt=0.0)
    min_factor: float = Field(default=config.STEP_MIN_FACTOR, gt=0.0)
    max_factor: float = Field(default=config.STEP_MAX_FACTOR, gt=0.0)
    blowup_threshold: Optional[float] = Field(
        default=None, gt=0.0, description="sup 范数超过该值即视为爆破（为空只检测非有限值）"
    )


class PotentialSpec(_StrictModel):
    """势函数配置"""
    kind: PotentialKind = PotentialKind.DOUBLE_WELL
    roots: list[float] = Field(default_factory=list, description="多项式势阱的根（奇数个，严格递增）")
    wells: int = Field(default=0, ge=0, description="正弦势阱的 l")


class AttentionSpec(_StrictModel):
    """注意力参数的随机初始化配置（不训练）"""
    projection_dim: int = Field(default=2, ge=1, description="投影维数 d′")
    leaky_slope: float = Field(default=config.DEFAULT_LEAKY_SLOPE, description="LeakyReLU 斜率")
    seed: Optional[int] = Field(default=None, description="随机种子（为空时用实验种子）")


class ModelParamsSpec(_StrictModel):
    """右端项参数"""
    alpha: Union[float, list[float]] = Field(default=1.0, description="扩散强度 α（标量或逐通道）")
    delta: Union[float, list[float]] = Field(default=1.0, description="势阱强度 δ（标量或逐通道）")
    beta: float = Field(default=0.0, ge=0.0, description="排斥偏置 β")
    coupling_file: Optional[str] = Field(default=None, description="acmp-explicit 的带符号耦合边列表")
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    attention: AttentionSpec = Field(default_factory=AttentionSpec)


class InitialConditionSpec(_StrictModel):
    """初值配置"""
    kind: InitialKind = InitialKind.GRAPH
    low: float = -1.0
    high: float = 1.0
    centers: list[float] = Field(default_factory=lambda: [2.0, -2.0], description="各组中心")
    spread: float = Field(default=0.1, ge=0.0, description="组内均匀扰动半宽")
    dim: Optional[int] = Field(default=None, ge=1, description="特征维数（为空时沿用图特征维数或 1）")


class OutputSpec(_StrictModel):
    """输出配置"""
    directory: Optional[str] = Field(default=None, description="输出目录（为空时用 ACMP_OUTPUT_DIR）")
    series: list[SeriesKind] = Field(
        default_factory=lambda: [SeriesKind.TRAJECTORY, SeriesKind.ENERGY, SeriesKind.CLUSTERS]
    )


class FlockingCheckSpec(_StrictModel):
    """双簇聚集构造参数与检查阈值"""
    n1: int = Field(default=5, ge=1, description="第一组节点数")
    n2: int = Field(default=5, ge=1, description="第二组节点数")
    s: float = Field(default=1.0, description="组内吸引强度 S")
    d: float = Field(default=0.1, description="组间排斥强度 D")
    eta: float = Field(default=0.1, ge=0.0, description="充分条件中的 η")
    c_prime: float = Field(default=0.5, ge=0.0, description="分离阈值 C′")
    t_check: Optional[float] = Field(default=None, ge=0.0, description="检查起始时间（默认 0.8·T）")


class ExperimentConfig(_StrictModel):
    """一次模拟实验的完整配置"""
    name: str = Field(default="run", description="实验名称")
    seed: Optional[int] = Field(default=None, description="随机种子（为空时用 ACMP_SEED）")
    graph: Optional[Union[GraphFileRef, TwoClassGraphSpec]] = Field(
        default=None, description="图（双簇聚集命令使用完全图，可省略）"
    )
    model: ModelKind = ModelKind.ACMP_GCN
    params: ModelParamsSpec = Field(default_factory=ModelParamsSpec)
    initial: InitialConditionSpec = Field(default_factory=InitialConditionSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    outputs: OutputSpec = Field(default_factory=OutputSpec)
    flocking: Optional[FlockingCheckSpec] = None
    beta_grid: Optional[list[float]] = Field(default=None, description="β 扫描网格")


# ============================================================
# 诊断报告
# ============================================================

class EnergyReport(BaseModel):
    """某一采样时刻的能量类诊断量"""
    time: float
    dirichlet: float = Field(description="Dirichlet 能量 E(x)")
    pseudo_gl: Optional[float] = Field(default=None, description="伪 Ginzburg-Landau 能量 Φ(x)")
    norm_sq: float = Field(description="Frobenius 范数平方 ‖x‖²")
    mass_center: list[float] = Field(description="逐通道质心 x_c")


class FlockingVerdict(BaseModel):
    """双簇聚集判定结果"""
    intra_spread_1: float
    intra_spread_2: float
    inter_min: float
    inter_min_per_channel: list[float]
    separated: bool
    c_prime: float
    t_check: float


class MomentReport(BaseModel):
    """两组二阶矩"""
    m2_v: float
    m2_w: float
    m2_hat: float
    center_1: Optional[list[float]] = None
    center_2: Optional[list[float]] = None


class FlockingCondition(BaseModel):
    """双簇聚集充分条件 α(S−D)·min{N₁,N₂} ≥ δ+η 的评估结果"""
    holds: bool
    margin: float
    s: float
    d: float
    n1: int
    n2: int
    structure_ok: bool = Field(description="系数符号模式是否满足分组结构")


class HomophilyReport(BaseModel):
    """同配率统计"""
    level: float
    counted_nodes: int
    isolated_nodes: int


class SolverStats(BaseModel):
    """积分统计"""
    method: SolverMethod
    accepted_steps: int = 0
    rejected_steps: int = 0
    rhs_evaluations: int = 0
    final_time: float = 0.0
    blow_up: bool = False
    blow_up_time: Optional[float] = None


class RunSummary(BaseModel):
    """run.json 内容：足以逐位复现一次运行"""
    name: str
    model: ModelKind
    seed: int
    env: str
    version: str
    config: dict[str, Any]
    solver: SolverStats
    blow_up: bool
    node_count: int
    edge_count: int
    final_dirichlet: Optional[float] = None
    homophily: Optional[HomophilyReport] = None
    flocking: Optional[FlockingVerdict] = None
    output_files: list[str] = Field(default_factory=list)


class SweepRow(BaseModel):
    """β 扫描的一行结果"""
    beta: float
    final_dirichlet: float
    cluster_count: int
    separation: float
    blow_up: bool
