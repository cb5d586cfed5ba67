"""
CSV 运行结果存储

所有 CSV 用标准 csv 模块写出，逗号分隔、首行表头；浮点数用 repr 格式，
与区域设置无关，读回时逐位相同。
"""

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from acmp.diagnostics import energy_series_to_rows, flocking_series, sign_clusters
from acmp.logger import get_logger
from acmp.models import EnergyReport, RunSummary, SweepRow
from acmp.solver import Trajectory
from acmp.store.base_store import BaseRunStore

logger = get_logger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
ENERGY_FILE = "energy.csv"
CLUSTERS_FILE = "clusters.csv"
FLOCKING_FILE = "flocking.csv"
SUMMARY_FILE = "run.json"
SWEEP_FILE = "sweep.csv"


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug("写出 %s", path)
    return path


def _as_3d(states: np.ndarray) -> np.ndarray:
    return states[:, :, None] if states.ndim == 2 else states


class CsvRunStore(BaseRunStore):
    """把一次运行写成目录下的若干 CSV 和一个 run.json"""

    def write_trajectory(self, run_dir: Path, traj: Trajectory) -> Path:
        states = _as_3d(traj.states)

        def rows():
            for t, X in zip(traj.times, states):
                for node, features in enumerate(X):
                    for channel, value in enumerate(features):
                        yield float(t), node, channel, float(value)

        return _write_csv(Path(run_dir) / TRAJECTORY_FILE, ["t", "node", "channel", "value"], rows())

    def write_energy(self, run_dir: Path, reports: Sequence[EnergyReport]) -> Path:
        header, rows = energy_series_to_rows(reports)
        return _write_csv(Path(run_dir) / ENERGY_FILE, header, rows)

    def write_clusters(self, run_dir: Path, traj: Trajectory) -> Path:
        def rows():
            for t, X in zip(traj.times, traj.states):
                for node, corner in enumerate(sign_clusters(X).corner_index):
                    yield float(t), node, int(corner)

        return _write_csv(Path(run_dir) / CLUSTERS_FILE, ["t", "node", "corner_index"], rows())

    def write_flocking(self, run_dir: Path, traj: Trajectory, partition: np.ndarray) -> Path:
        return _write_csv(
            Path(run_dir) / FLOCKING_FILE,
            ["t", "intra_spread_1", "intra_spread_2", "inter_min"],
            flocking_series(traj, partition),
        )

    def write_summary(self, run_dir: Path, summary: RunSummary) -> Path:
        path = Path(run_dir) / SUMMARY_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        return path

    def write_sweep(self, run_dir: Path, rows: Sequence[SweepRow]) -> Path:
        header = list(SweepRow.model_fields)
        return _write_csv(
            Path(run_dir) / SWEEP_FILE,
            header,
            ([getattr(row, name) for name in header] for row in rows),
        )

    # ----------------------------------------------------------
    # 读取
    # ----------------------------------------------------------

    def read_summary(self, run_dir: Path) -> RunSummary:
        raw = json.loads((Path(run_dir) / SUMMARY_FILE).read_text(encoding="utf-8"))
        return RunSummary.model_validate(raw)

    def read_trajectory(self, run_dir: Path) -> tuple[np.ndarray, np.ndarray]:
        with open(Path(run_dir) / TRAJECTORY_FILE, newline="", encoding="utf-8") as f:
            records = [
                (float(r["t"]), int(r["node"]), int(r["channel"]), float(r["value"]))
                for r in csv.DictReader(f)
            ]
        times = sorted({r[0] for r in records})
        node_count = max(r[1] for r in records) + 1
        dim = max(r[2] for r in records) + 1
        index = {t: k for k, t in enumerate(times)}
        states = np.empty((len(times), node_count, dim))
        for t, node, channel, value in records:
            states[index[t], node, channel] = value
        return np.array(times), states
