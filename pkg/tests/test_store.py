"""
存储层测试

测试图文件的读写（边列表、标签、特征、显式耦合）与 CsvRunStore 的各类输出。
"""

import csv
import json

import numpy as np
import pytest

from acmp import config
from acmp.errors import (
    AsymmetricConflictError,
    ConfigError,
    DuplicateEdgeError,
    GraphFormatError,
    IndexOutOfRangeError,
    MissingExplicitEntryError,
    MissingLabelsError,
)
from acmp.coupling import CouplingKind, effective_coupling
from acmp.dynamics import rhs_grand
from acmp.diagnostics import energy_series
from acmp.graph import build_graph
from acmp.models import (
    ModelKind,
    RunSummary,
    SolverMethod,
    SolverSpec,
    SolverStats,
    SweepRow,
)
from acmp.solver import Trajectory, integrate
from acmp.store import CsvRunStore, create_run_store
from acmp.store.graph_store import (
    load_coupling_matrix,
    load_features,
    load_graph,
    load_labels,
    write_graph,
)


def _write(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


def _read_rows(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


# ============================================================
# 工厂
# ============================================================

class TestFactory:
    """create_run_store"""

    def test_default_csv(self):
        assert isinstance(create_run_store(), CsvRunStore)

    def test_unknown_format(self, monkeypatch):
        monkeypatch.setattr(config, "OUTPUT_FORMAT", "parquet")
        with pytest.raises(ConfigError):
            create_run_store()


# ============================================================
# 边列表与标签
# ============================================================

class TestLoadGraph:
    """边列表读取"""

    def test_basic(self, tmp_dir):
        path = _write(tmp_dir / "edges.txt", "# 注释\n0 1 1.0\n1 2 0.5  # 行尾注释\n\n")
        g = load_graph(path)
        assert g.node_count == 3
        assert g.edges() == [(0, 1, 1.0), (1, 2, 0.5)]

    def test_declared_node_count(self, tmp_dir):
        path = _write(tmp_dir / "edges.txt", "# nodes 5\n0 1 1.0\n")
        assert load_graph(path).node_count == 5

    def test_explicit_node_count_wins(self, tmp_dir):
        path = _write(tmp_dir / "edges.txt", "# nodes 5\n0 1 1.0\n")
        assert load_graph(path, node_count=4).node_count == 4

    def test_empty_needs_node_count(self, tmp_dir):
        path = _write(tmp_dir / "edges.txt", "# 空图\n")
        with pytest.raises(GraphFormatError):
            load_graph(path)
        assert load_graph(path, node_count=3).edge_count == 0

    @pytest.mark.parametrize("content", ["0 1\n", "0 1 1.0 2.0\n", "a b 1.0\n", "0 1 x\n", "# nodes many\n"])
    def test_malformed(self, tmp_dir, content):
        path = _write(tmp_dir / "edges.txt", content)
        with pytest.raises(GraphFormatError):
            load_graph(path, node_count=3)

    def test_duplicate_and_conflict(self, tmp_dir):
        with pytest.raises(DuplicateEdgeError):
            load_graph(_write(tmp_dir / "dup.txt", "0 1 1.0\n1 0 1.0\n"))
        with pytest.raises(AsymmetricConflictError):
            load_graph(_write(tmp_dir / "conf.txt", "0 1 1.0\n1 0 2.0\n"))

    def test_out_of_range(self, tmp_dir):
        with pytest.raises(IndexOutOfRangeError):
            load_graph(_write(tmp_dir / "edges.txt", "0 3 1.0\n"), node_count=3)

    def test_labels(self, tmp_dir):
        edges = _write(tmp_dir / "edges.txt", "0 1 1.0\n1 2 1.0\n")
        labels = _write(tmp_dir / "labels.txt", "0 0\n1 0\n2 1\n")
        g = load_graph(edges, labels)
        assert g.labels.tolist() == [0, 0, 1]

    def test_missing_labels(self, tmp_dir):
        edges = _write(tmp_dir / "edges.txt", "0 1 1.0\n1 2 1.0\n")
        labels = _write(tmp_dir / "labels.txt", "0 0\n2 1\n")
        with pytest.raises(MissingLabelsError):
            load_graph(edges, labels)

    def test_label_out_of_range(self, tmp_dir):
        with pytest.raises(IndexOutOfRangeError):
            load_labels(_write(tmp_dir / "labels.txt", "7 0\n"), 3)

    @pytest.mark.parametrize("content", ["0 A\n", "x 0\n", "0 1.5\n"])
    def test_label_not_integer(self, tmp_dir, content):
        with pytest.raises(GraphFormatError):
            load_labels(_write(tmp_dir / "labels.txt", content), 3)


class TestLoadFeatures:
    """特征文件"""

    def test_basic(self, tmp_dir):
        path = _write(tmp_dir / "features.txt", "1.0 2.0\n-0.5 3.25\n")
        assert load_features(path, 2).tolist() == [[1.0, 2.0], [-0.5, 3.25]]

    @pytest.mark.parametrize("content", ["1.0 2.0\n", "1.0 2.0\n3.0\n", "1.0 x\n2.0 3.0\n"])
    def test_malformed(self, tmp_dir, content):
        with pytest.raises(GraphFormatError):
            load_features(_write(tmp_dir / "features.txt", content), 2)


class TestLoadCouplingMatrix:
    """带符号的显式耦合文件"""

    def test_signed_and_explicit_zero(self, tmp_dir):
        path = _write(tmp_dir / "coupling.txt", "0 1 1.0\n1 2 -0.25\n0 2 0.0\n")
        model = load_coupling_matrix(path, 3)
        assert model.kind is CouplingKind.EXPLICIT
        dense = model.matrix.toarray()
        assert dense[1, 2] == dense[2, 1] == -0.25
        assert model.matrix.nnz == 6

    def test_missing_edge_entry(self, tmp_dir, triangle):
        model = load_coupling_matrix(_write(tmp_dir / "coupling.txt", "0 1 1.0\n"), 3)
        with pytest.raises(MissingExplicitEntryError):
            effective_coupling(model, triangle)

    def test_conflict(self, tmp_dir):
        with pytest.raises(AsymmetricConflictError):
            load_coupling_matrix(_write(tmp_dir / "coupling.txt", "0 1 1.0\n1 0 -1.0\n"), 2)

    def test_out_of_range(self, tmp_dir):
        with pytest.raises(IndexOutOfRangeError):
            load_coupling_matrix(_write(tmp_dir / "coupling.txt", "0 5 1.0\n"), 2)


# ============================================================
# 导出
# ============================================================

class TestWriteGraph:
    """write_graph 与读回"""

    def test_round_trip_bit_exact(self, tmp_dir, synthetic):
        g, features = synthetic
        paths = write_graph(tmp_dir / "graph", g, features, {"seed": 7})

        loaded = load_graph(paths["edges"], paths["labels"])
        assert loaded.node_count == g.node_count
        assert np.array_equal(loaded.adjacency.indptr, g.adjacency.indptr)
        assert np.array_equal(loaded.adjacency.indices, g.adjacency.indices)
        assert np.array_equal(loaded.adjacency.data, g.adjacency.data)
        assert np.array_equal(loaded.labels, g.labels)
        assert np.array_equal(load_features(paths["features"], g.node_count), features)

    def test_header(self, tmp_dir, path3):
        paths = write_graph(tmp_dir, path3, header={"seed": 3})
        meta = json.loads(paths["header"].read_text(encoding="utf-8"))
        assert meta == {"node_count": 3, "edge_count": 2, "seed": 3}
        assert "labels" not in paths and "features" not in paths

    def test_isolated_nodes_kept(self, tmp_dir):
        g = build_graph([(0, 1, 1.0)], 4)
        paths = write_graph(tmp_dir, g)
        assert load_graph(paths["edges"]).node_count == 4


# ============================================================
# 运行输出
# ============================================================

class TestCsvRunStore:
    """CSV / JSON 输出"""

    @pytest.fixture
    def k2_run(self, k2):
        spec = SolverSpec(t_end=1.0, sample_every=0.5)
        return integrate(lambda x: rhs_grand(k2, x), np.array([[1.0, 0.5], [-1.0, 0.25]]), spec)

    def test_trajectory_round_trip(self, tmp_dir, k2_run):
        store = CsvRunStore()
        path = store.write_trajectory(tmp_dir, k2_run)
        rows = _read_rows(path)
        assert list(rows[0]) == ["t", "node", "channel", "value"]
        assert len(rows) == 3 * 2 * 2
        times, states = store.read_trajectory(tmp_dir)
        assert np.array_equal(times, k2_run.times)
        assert np.array_equal(states, k2_run.states)

    def test_single_channel_trajectory(self, tmp_dir):
        traj = Trajectory(
            times=np.array([0.0]), states=np.array([[1.0, 2.0]]),
            stats=SolverStats(method=SolverMethod.EULER),
        )
        store = CsvRunStore()
        store.write_trajectory(tmp_dir, traj)
        _, states = store.read_trajectory(tmp_dir)
        assert states.shape == (1, 2, 1)

    def test_energy(self, tmp_dir, k2, k2_run):
        path = CsvRunStore().write_energy(tmp_dir, energy_series(k2_run, k2))
        rows = _read_rows(path)
        assert list(rows[0]) == ["t", "dirichlet", "pseudo_gl", "norm_sq", "mass_center_0", "mass_center_1"]
        assert float(rows[0]["dirichlet"]) == pytest.approx(4.0 + 0.0625)
        assert rows[0]["pseudo_gl"] == "nan"

    def test_clusters(self, tmp_dir, k2_run):
        rows = _read_rows(CsvRunStore().write_clusters(tmp_dir, k2_run))
        assert list(rows[0]) == ["t", "node", "corner_index"]
        assert [r["corner_index"] for r in rows[:2]] == ["3", "2"]

    def test_flocking(self, tmp_dir, k2_run):
        rows = _read_rows(CsvRunStore().write_flocking(tmp_dir, k2_run, np.array([0, 1])))
        assert list(rows[0]) == ["t", "intra_spread_1", "intra_spread_2", "inter_min"]
        assert float(rows[0]["inter_min"]) == pytest.approx(0.25)

    def test_summary_round_trip(self, tmp_dir):
        summary = RunSummary(
            name="demo", model=ModelKind.GRAND, seed=1, env="test", version="0.1.0",
            config={"name": "demo"}, solver=SolverStats(method=SolverMethod.DOPRI5),
            blow_up=False, node_count=2, edge_count=1, final_dirichlet=0.5,
        )
        store = CsvRunStore()
        store.write_summary(tmp_dir / "nested", summary)
        assert store.read_summary(tmp_dir / "nested") == summary

    def test_sweep(self, tmp_dir):
        rows = [
            SweepRow(beta=0.0, final_dirichlet=0.1, cluster_count=2, separation=1.5, blow_up=False),
            SweepRow(beta=1.0, final_dirichlet=2.0, cluster_count=4, separation=float("nan"), blow_up=True),
        ]
        written = _read_rows(CsvRunStore().write_sweep(tmp_dir, rows))
        assert list(written[0]) == ["beta", "final_dirichlet", "cluster_count", "separation", "blow_up"]
        assert written[1]["blow_up"] == "true"
        assert written[1]["separation"] == "nan"
