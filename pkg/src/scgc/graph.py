"""Graph structure: edge storage, symmetric normalisation, multi-hop
influence, KNN construction and a stochastic block model generator."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .core import DTYPE, as_matrix, matmul

log = logging.getLogger(__name__)

CUMULATIVE = "cumulative"
SINGLE_POWER = "single-power"


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Undirected simple graph.

    ``edges`` holds each undirected pair once as ``(i, j)`` with ``i < j``,
    rows sorted lexicographically, so symmetry holds by construction.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        if e.size:
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError(f"edge index out of range for n={self.n}")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not stored")
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0) if e.size else e
        object.__setattr__(self, "edges", e)

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "SparseGraph":
        pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        return cls(n, pairs.reshape(-1, 2))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def directed_edges(self) -> np.ndarray:
        """Both orientations of every edge, shape (2m, 2)."""
        return np.concatenate([self.edges, self.edges[:, ::-1]])

    def has_edge(self, i: int, j: int) -> bool:
        a, b = min(i, j), max(i, j)
        return (a, b) in self.edge_set()

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=DTYPE)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a


@dataclass(frozen=True, eq=False)
class InfluenceMatrix:
    """Dense positive-pair weights for the contrastive loss."""

    gamma: np.ndarray
    hops: int
    mode: str

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def slice(self, idx) -> np.ndarray:
        """The B x B sub-block for the batch rows ``idx``."""
        idx = np.asarray(idx)
        return self.gamma[np.ix_(idx, idx)]


def normalize_adjacency(g: SparseGraph) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I."""
    a = g.to_dense()
    a[np.diag_indices(g.n)] += 1.0
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def _check_square_symmetric(a_hat) -> np.ndarray:
    a_hat = as_matrix(a_hat, "a_hat")
    if a_hat.shape[0] != a_hat.shape[1]:
        raise ValueError(f"a_hat must be square, got {a_hat.shape}")
    if not np.allclose(a_hat, a_hat.T, rtol=0.0, atol=1e-12):
        raise ValueError("a_hat must be symmetric")
    return a_hat


def cumulative_influence(a_hat, hops: int) -> InfluenceMatrix:
    """Sum of the first ``hops`` powers of ``a_hat``."""
    if hops < 1:
        raise ValueError(f"hop count must be >= 1, got {hops}")
    a_hat = _check_square_symmetric(a_hat)
    power = a_hat.copy()
    total = a_hat.copy()
    for _ in range(hops - 1):
        power = matmul(power, a_hat)
        total += power
    return InfluenceMatrix(total, hops, CUMULATIVE)


def single_power_influence(a_hat, hops: int) -> InfluenceMatrix:
    """``a_hat`` raised to exactly ``hops``."""
    if hops < 1:
        raise ValueError(f"hop count must be >= 1, got {hops}")
    a_hat = _check_square_symmetric(a_hat)
    power = a_hat.copy()
    for _ in range(hops - 1):
        power = matmul(power, a_hat)
    return InfluenceMatrix(power, hops, SINGLE_POWER)


def influence_for_variant(g: SparseGraph, variant: str, hops: int) -> InfluenceMatrix:
    """Cumulative influence for scgc-star, single hop power for scgc."""
    a_hat = normalize_adjacency(g)
    if variant == "scgc-star":
        return cumulative_influence(a_hat, hops)
    if variant == "scgc":
        return single_power_influence(a_hat, hops)
    raise ValueError(f"unknown variant {variant!r}")


def build_knn_graph(features, k: int, metric: str = "euclidean", chunk: int = 1024) -> SparseGraph:
    """Union-symmetrised k-nearest-neighbour graph.

    Ties in distance go to the lower node index.
    """
    x = as_matrix(features, "features")
    n = x.shape[0]
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    elif metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")

    pairs = []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        # per-pair differences keep exact ties exact
        d = cdist(x[start:stop], x, "sqeuclidean")
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        nbrs = np.argsort(d, axis=1, kind="stable")[:, :k]
        src = np.repeat(np.arange(start, stop), k)
        pairs.append(np.stack([src, nbrs.ravel()], axis=1))
    return SparseGraph(n, np.concatenate(pairs))


def sbm_generate(block_sizes, p_in: float, p_out: float, feature_dim: int,
                 noise_sigma: float, rng: np.random.Generator):
    """Sample a stochastic block model with noisy one-hot block features.

    Returns ``(graph, features, labels)``.
    """
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or any(b < 1 for b in block_sizes):
        raise ValueError(f"every block needs at least one node, got {block_sizes}")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_dim < len(block_sizes):
        raise ValueError("feature_dim must be at least the number of blocks")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")

    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    n = labels.size
    probs = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    draws = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    keep = draws[iu, ju] < probs[iu, ju]
    graph = SparseGraph(n, np.stack([iu[keep], ju[keep]], axis=1))

    features = np.zeros((n, feature_dim), dtype=DTYPE)
    features[np.arange(n), labels] = 1.0
    if noise_sigma > 0:
        features += noise_sigma * rng.standard_normal((n, feature_dim))
    return graph, features, labels


def read_edge_list(path, n: int) -> SparseGraph:
    """Parse ``i j`` lines (0-based, '#' comments) into a graph on ``n`` nodes."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            i, j = int(parts[0]), int(parts[1])
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"{path}:{lineno}: index out of range for {n} nodes")
            if i == j:
                log.warning("%s:%d: dropping self-loop on node %d", path, lineno, i)
                continue
            pairs.append((i, j))
    return SparseGraph.from_pairs(n, pairs)


def write_edge_list(g: SparseGraph, path) -> None:
    with open(Path(path), "w") as fh:
        fh.write(f"# {g.n} nodes, {g.num_edges} undirected edges\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")
