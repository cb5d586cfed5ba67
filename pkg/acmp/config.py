"""
ACMP 配置管理

集中管理所有配置项，支持通过环境变量覆盖默认值。

注意：所有配置值在模块导入时固定，运行时修改环境变量不会生效。
测试中需要覆盖配置时，请使用 monkeypatch.setattr(config, ...) 而非 os.environ。
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file (if it exists)
load_dotenv()

# 项目根目录
_PROJECT_ROOT = Path(__file__).parent.parent

# 运行环境 (dev, test, prod)，写入 run.json 便于追溯
ENV_NAME = os.getenv("ACMP_ENV", "dev")

# 默认随机种子（配置文件和命令行都未指定时使用）
DEFAULT_SEED = int(os.getenv("ACMP_SEED", "0"))

# 实验输出目录
OUTPUT_DIR = Path(os.getenv("ACMP_OUTPUT_DIR", str(_PROJECT_ROOT / "runs")))

# 输出后端（目前只有 csv）
OUTPUT_FORMAT = os.getenv("ACMP_OUTPUT_FORMAT", "csv")

# 稠密谱分解允许的最大节点数
SPECTRAL_CAP = int(os.getenv("ACMP_SPECTRAL_CAP", "2048"))

# β 扫描的默认并行数
DEFAULT_JOBS = int(os.getenv("ACMP_JOBS", "1"))

# 积分器步数上限
DEFAULT_MAX_STEPS = int(os.getenv("ACMP_MAX_STEPS", "1000000"))

# ------------------------------------------------------------
# 数值常量
# ------------------------------------------------------------

# 选取最小正特征值时的零判定阈值（相对 λ_max）
ZERO_EIGENVALUE_RTOL = 1e-9

# 自适应步长默认容差
DEFAULT_ATOL = 1e-7
DEFAULT_RTOL = 1e-5

# 步长控制器常数
STEP_SAFETY = 0.9
STEP_MIN_FACTOR = 0.2
STEP_MAX_FACTOR = 10.0

# 自适应步长下限 = STEP_UNDERFLOW_FACTOR * t_end
STEP_UNDERFLOW_FACTOR = 1e-14

# 初始步长 h0 = min(INITIAL_STEP_CAP, t_end / 100)
INITIAL_STEP_CAP = 1e-2

# 稳态判定阈值 ‖rhs‖_∞
STEADY_STATE_TOL = 1e-10

# 双簇聚集检查默认从 0.8·t_end 开始
DEFAULT_T_CHECK_FRACTION = 0.8

# 注意力 LeakyReLU 负半轴斜率
DEFAULT_LEAKY_SLOPE = 0.2

# 稳定平衡点计数的网格点数
EQUILIBRIUM_GRID_SAMPLES = 10001
