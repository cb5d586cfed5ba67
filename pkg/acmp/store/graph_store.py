"""
图文件读写

边列表：每行 `i j weight`，`#` 之后为注释；导出的文件首行为 `# nodes N`。
标签：每行 `node_id class_id`。
特征：第 i 行是节点 i 的 d 个特征，空格分隔。
导出时另写一个 JSON 头，记录生成参数与种子。浮点数一律按 repr 写出，读回逐位相同。
"""

import json
from pathlib import Path
from typing import Any, Optional

import numpy as np

from acmp.coupling import CouplingModel, explicit_coupling
from acmp.errors import (
    AsymmetricConflictError,
    DuplicateEdgeError,
    GraphFormatError,
    IndexOutOfRangeError,
)
from acmp.graph import Graph, build_graph, csr_from_triples
from acmp.logger import get_logger

logger = get_logger(__name__)

EDGES_FILE = "edges.txt"
LABELS_FILE = "labels.txt"
FEATURES_FILE = "features.txt"
HEADER_FILE = "graph.json"


def _data_lines(path: Path):
    """逐行产出 (行号, 字段列表)；顺带解析 `# nodes N` 头"""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            content, _, comment = line.partition("#")
            fields = content.split()
            if fields:
                yield lineno, fields, None
            elif comment.split()[:1] == ["nodes"]:
                yield lineno, None, comment.split()[1:]


def _read_triples(path: Path) -> tuple[list[tuple[int, int, float]], Optional[int]]:
    triples = []
    declared = None
    for lineno, fields, header in _data_lines(path):
        if header is not None:
            try:
                declared = int(header[0])
            except (IndexError, ValueError):
                raise GraphFormatError(f"{path}:{lineno}: 节点数头格式应为 `# nodes N`")
            continue
        if len(fields) != 3:
            raise GraphFormatError(f"{path}:{lineno}: 每行应为 `i j weight`，实际 {len(fields)} 个字段")
        try:
            triples.append((int(fields[0]), int(fields[1]), float(fields[2])))
        except ValueError as e:
            raise GraphFormatError(f"{path}:{lineno}: 无法解析: {e}") from e
    return triples, declared


def _resolve_node_count(triples, declared: Optional[int], node_count: Optional[int]) -> int:
    if node_count is not None:
        return node_count
    if declared is not None:
        return declared
    if not triples:
        raise GraphFormatError("空边列表必须给出节点数")
    return max(max(i, j) for i, j, _ in triples) + 1


def load_labels(path, node_count: int) -> dict[int, int]:
    labels: dict[int, int] = {}
    for lineno, fields, _ in _data_lines(Path(path)):
        if fields is None:
            continue
        if len(fields) != 2:
            raise GraphFormatError(f"{path}:{lineno}: 每行应为 `node_id class_id`")
        try:
            node, cls = int(fields[0]), int(fields[1])
        except ValueError as e:
            raise GraphFormatError(f"{path}:{lineno}: 无法解析: {e}") from e
        if not 0 <= node < node_count:
            raise IndexOutOfRangeError(f"{path}:{lineno}: 节点 {node} 越界")
        labels[node] = cls
    return labels


def load_graph(edges_path, labels_path=None, node_count: Optional[int] = None) -> Graph:
    """读取边列表（和可选的标签文件）构建图"""
    triples, declared = _read_triples(Path(edges_path))
    n = _resolve_node_count(triples, declared, node_count)
    labels = load_labels(labels_path, n) if labels_path else None
    graph = build_graph(triples, n, labels)
    logger.info("读取图 %s: N=%d, 边数=%d", edges_path, n, graph.edge_count)
    return graph


def load_features(path, node_count: int) -> np.ndarray:
    rows = []
    for lineno, fields, _ in _data_lines(Path(path)):
        if fields is None:
            continue
        try:
            rows.append([float(v) for v in fields])
        except ValueError as e:
            raise GraphFormatError(f"{path}:{lineno}: 无法解析特征: {e}") from e
    if len(rows) != node_count or len({len(r) for r in rows}) != 1:
        raise GraphFormatError(f"{path}: 特征应为 {node_count} 行且每行维数相同")
    return np.array(rows, dtype=float)


def load_coupling_matrix(path, node_count: int) -> CouplingModel:
    """
    读取带符号权重的边列表作为显式耦合矩阵

    与图一样做对称闭包；零权重作为显式零保留。
    """
    triples, _ = _read_triples(Path(path))
    seen: dict[tuple[int, int], float] = {}
    for i, j, w in triples:
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise IndexOutOfRangeError(f"耦合项 ({i}, {j}) 越界，节点数为 {node_count}")
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            if seen[key] == w:
                raise DuplicateEdgeError(f"耦合项 {key} 重复出现")
            raise AsymmetricConflictError(f"耦合项 {key} 给出了不同值 {seen[key]} 与 {w}")
        seen[key] = w

    upper = np.array(list(seen), dtype=np.int64).reshape(-1, 2)
    values = np.array(list(seen.values()), dtype=float)
    matrix = csr_from_triples(
        np.concatenate([upper[:, 0], upper[:, 1]]),
        np.concatenate([upper[:, 1], upper[:, 0]]),
        np.concatenate([values, values]),
        node_count,
    )
    logger.info("读取显式耦合 %s: %d 对", path, len(seen))
    return explicit_coupling(matrix)


# ============================================================
# 导出
# ============================================================

def write_graph(
    out_dir,
    g: Graph,
    features: Optional[np.ndarray] = None,
    header: Optional[dict[str, Any]] = None,
) -> dict[str, Path]:
    """把图（以及标签、特征、JSON 头）写到目录下，返回各文件路径"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"edges": out / EDGES_FILE}

    lines = [f"# nodes {g.node_count}"]
    lines += [f"{i} {j} {w!r}" for i, j, w in g.edges()]
    paths["edges"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    if g.labels is not None:
        paths["labels"] = out / LABELS_FILE
        paths["labels"].write_text(
            "".join(f"{i} {int(c)}\n" for i, c in enumerate(g.labels)), encoding="utf-8"
        )
    if features is not None:
        X = np.asarray(features, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        paths["features"] = out / FEATURES_FILE
        paths["features"].write_text(
            "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in X), encoding="utf-8"
        )

    paths["header"] = out / HEADER_FILE
    meta = {"node_count": g.node_count, "edge_count": g.edge_count, **(header or {})}
    paths["header"].write_text(json.dumps(meta, indent=2, ensure_ascii=False), encoding="utf-8")
    logger.info("导出图到 %s", out)
    return paths
