"""
运行结果存储接口

定义一次模拟运行的输出规范：轨迹、能量序列、聚类、双簇聚集序列、
run.json 摘要以及 β 扫描汇总。
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Sequence

import numpy as np

from acmp.models import EnergyReport, RunSummary, SweepRow
from acmp.solver import Trajectory


class BaseRunStore(ABC):
    """运行结果存储基础接口"""

    @abstractmethod
    def write_trajectory(self, run_dir: Path, traj: Trajectory) -> Path:
        """逐行写出 (t, node, channel, value)"""
        pass

    @abstractmethod
    def write_energy(self, run_dir: Path, reports: Sequence[EnergyReport]) -> Path:
        pass

    @abstractmethod
    def write_clusters(self, run_dir: Path, traj: Trajectory) -> Path:
        """逐行写出 (t, node, corner_index)"""
        pass

    @abstractmethod
    def write_flocking(self, run_dir: Path, traj: Trajectory, partition: np.ndarray) -> Path:
        pass

    @abstractmethod
    def write_summary(self, run_dir: Path, summary: RunSummary) -> Path:
        pass

    @abstractmethod
    def write_sweep(self, run_dir: Path, rows: Sequence[SweepRow]) -> Path:
        pass

    # ----------------------------------------------------------
    # 读取
    # ----------------------------------------------------------

    @abstractmethod
    def read_summary(self, run_dir: Path) -> RunSummary:
        pass

    @abstractmethod
    def read_trajectory(self, run_dir: Path) -> tuple[np.ndarray, np.ndarray]:
        """返回 (times, states)，states 形状为 (T, N, d)"""
        pass
