"""
ACMP 异常定义

所有库内异常都继承自 AcmpError。命令行据此映射退出码：
ConfigError（以及 pydantic 的 ValidationError）→ 2，其余 AcmpError → 3。
数值爆破（blow-up）不是异常，而是 Trajectory 上的标记。
"""


class AcmpError(Exception):
    """ACMP 异常基类"""


class ConfigError(AcmpError, ValueError):
    """配置非法或包含未知字段"""


# ------------------------------------------------------------
# 图结构
# ------------------------------------------------------------

class GraphError(AcmpError):
    """图构建 / 读取错误基类"""


class IndexOutOfRangeError(GraphError):
    """节点下标越界"""


class NegativeWeightError(GraphError):
    """边权为负或不是有限数"""


class DuplicateEdgeError(GraphError):
    """同一条边重复出现"""


class AsymmetricConflictError(GraphError):
    """同一节点对给出了两个不同的权重，或显式矩阵不对称"""


class SelfLoopError(GraphError):
    """不允许存储自环"""


class MissingLabelsError(GraphError):
    """需要节点标签但图上没有"""


class GraphTooLargeForDenseSpectrumError(GraphError):
    """节点数超过稠密谱分解上限"""


class InvalidProbabilityError(GraphError, ConfigError):
    """合成图的连边概率不满足 0 ≤ p_out ≤ p_in ≤ 1"""


class GraphFormatError(GraphError):
    """边列表 / 标签 / 特征文件格式错误"""


# ------------------------------------------------------------
# 耦合与动力学
# ------------------------------------------------------------

class DimensionMismatchError(AcmpError, ValueError):
    """特征矩阵形状与图或参数不一致"""


class MissingExplicitEntryError(AcmpError):
    """显式耦合矩阵缺少某条图边上的系数"""


class InvalidStrengthError(AcmpError, ValueError):
    """双簇耦合强度参数非法"""


class ScalarAlphaRequiredError(AcmpError):
    """伪 Ginzburg-Landau 能量只对标量 α 有定义"""


class InvalidPotentialError(AcmpError, ValueError):
    """势函数参数非法"""


# ------------------------------------------------------------
# 诊断
# ------------------------------------------------------------

class InsufficientDataError(AcmpError, ValueError):
    """序列中可用的数据点不足以拟合"""


# ------------------------------------------------------------
# 积分器
# ------------------------------------------------------------

class SolverError(AcmpError):
    """积分器错误基类"""


class MaxStepsExceededError(SolverError):
    """超过最大步数"""


class StepUnderflowError(SolverError):
    """自适应步长小于下限"""


class ObserverError(SolverError):
    """观察者回调失败"""
