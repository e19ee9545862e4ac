"""On-disk dataset layout.

A dataset directory holds::

    features.tsv   first line "n<TAB>d", then n rows of d tab-separated values
    edges.txt      optional; "i j" per line, 0-based, '#' starts a comment
    labels.txt     optional; one integer class id per line
    meta.json      optional; {"name": ..., "class_count": ...}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import SparseGraph, build_knn_graph, read_edge_list, write_edge_list

FEATURES = "features.tsv"
EDGES = "edges.txt"
LABELS = "labels.txt"
META = "meta.json"


@dataclass(eq=False)
class Dataset:
    name: str
    features: np.ndarray
    graph: SparseGraph
    labels: np.ndarray | None
    class_count: int | None

    def __post_init__(self):
        if self.graph.n != self.features.shape[0]:
            raise ValueError(f"graph has {self.graph.n} nodes, features have {self.features.shape[0]} rows")
        if self.labels is not None:
            if self.labels.shape != (self.features.shape[0],):
                raise ValueError("need exactly one label per node")
            if self.class_count is None:
                self.class_count = int(self.labels.max()) + 1
            if self.labels.min() < 0 or self.labels.max() >= self.class_count:
                raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None
            and np.array_equal(self.labels, other.labels))
        return (self.name == other.name and self.class_count == other.class_count
                and np.array_equal(self.features, other.features)
                and self.graph == other.graph and same_labels)


def read_features(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: header must be 'n d'")
        n, d = int(header[0]), int(header[1])
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != d:
                raise ValueError(f"{path}:{lineno}: expected {d} values, got {len(vals)}")
            rows.append([float(v) for v in vals])
    if len(rows) != n:
        raise ValueError(f"{path}: header says {n} rows, found {len(rows)}")
    x = np.array(rows, dtype=np.float64).reshape(n, d)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{path}: non-finite feature values")
    return x


def write_features(path, x: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"{x.shape[0]}\t{x.shape[1]}\n")
        for row in x:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")


def read_labels(path, n: int) -> np.ndarray:
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if line:
                try:
                    labels.append(int(line))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: not an integer label: {line!r}") from None
    if len(labels) != n:
        raise ValueError(f"{path}: {len(labels)} labels for {n} nodes")
    return np.array(labels, dtype=np.int64)


def load_dataset(directory, knn_k: int | None = None, knn_metric: str = "euclidean") -> Dataset:
    d = Path(directory)
    if not (d / FEATURES).is_file():
        raise FileNotFoundError(f"no {FEATURES} in {d}")
    has_edges = (d / EDGES).is_file()
    if has_edges and knn_k is not None:
        raise ValueError(f"{d} has {EDGES} and a KNN k was given; pick one structure source")
    if not has_edges and knn_k is None:
        raise ValueError(f"{d} has no {EDGES}; pass a KNN k to build the graph from features")

    x = read_features(d / FEATURES)
    graph = read_edge_list(d / EDGES, x.shape[0]) if has_edges else build_knn_graph(x, knn_k, knn_metric)
    labels = read_labels(d / LABELS, x.shape[0]) if (d / LABELS).is_file() else None
    meta = json.loads((d / META).read_text()) if (d / META).is_file() else {}
    return Dataset(meta.get("name", d.name), x, graph, labels, meta.get("class_count"))


def save_dataset(ds: Dataset, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_features(d / FEATURES, ds.features)
    write_edge_list(ds.graph, d / EDGES)
    if ds.labels is not None:
        (d / LABELS).write_text("".join(f"{int(v)}\n" for v in ds.labels))
    (d / META).write_text(json.dumps({"name": ds.name, "class_count": ds.class_count}))
    return d
