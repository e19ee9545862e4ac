"""Clustering quality: ACC under optimal matching, NMI, ARI and macro-F1."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class MetricReport:
    acc: float
    nmi: float
    ari: float
    f1: float
    mapping: dict[int, int]

    def to_json(self) -> str:
        doc = asdict(self)
        doc["mapping"] = {str(k): v for k, v in self.mapping.items()}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        doc = json.loads(text)
        doc["mapping"] = {int(k): int(v) for k, v in doc["mapping"].items()}
        return cls(**doc)


def _encode(labels) -> tuple[np.ndarray, np.ndarray]:
    values, codes = np.unique(np.asarray(labels), return_inverse=True)
    return values, codes.ravel()


def contingency(pred, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts table with rows = predicted clusters, cols = true classes."""
    pv, pc = _encode(pred)
    tv, tc = _encode(truth)
    table = np.zeros((len(pv), len(tv)), dtype=np.int64)
    np.add.at(table, (pc, tc), 1)
    return table, pv, tv


def _check(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.size != truth.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    return pred, truth


def optimal_mapping(pred, truth) -> dict[int, int]:
    """Cluster -> class assignment maximising the number of matched nodes.

    With more clusters than classes the surplus clusters map to fresh labels
    (``max(truth) + 1``, ...), so they never count as matches.
    """
    pred, truth = _check(pred, truth)
    table, pv, tv = contingency(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    spare = int(tv.max()) + 1
    mapping = {}
    for r, c in zip(rows, cols):
        if r >= len(pv):
            continue
        if c < len(tv):
            mapping[int(pv[r])] = int(tv[c])
        else:
            mapping[int(pv[r])] = spare
            spare += 1
    return mapping


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi_score(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    pred, truth = _check(pred, truth)
    table, _, _ = contingency(pred, truth)
    n = pred.size
    h_pred = _entropy(table.sum(1), n)
    h_true = _entropy(table.sum(0), n)
    if h_pred == 0.0 and h_true == 0.0:
        # both partitions are a single block, hence identical
        return 1.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(table.sum(1), table.sum(0))[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return max(0.0, min(1.0, mi / (0.5 * (h_pred + h_true))))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari_score(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    table, _, _ = contingency(pred, truth)
    n = pred.size
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(1)).sum()
    sum_b = _comb2(table.sum(0)).sum()
    total = _comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def macro_f1(pred, truth) -> float:
    """Unweighted mean F1 over every label seen in either vector."""
    pred, truth = _check(pred, truth)
    scores = []
    for c in np.union1d(pred, truth):
        tp = np.count_nonzero((pred == c) & (truth == c))
        fp = np.count_nonzero((pred == c) & (truth != c))
        fn = np.count_nonzero((pred != c) & (truth == c))
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def clustering_metrics(pred, truth) -> MetricReport:
    pred, truth = _check(pred, truth)
    mapping = optimal_mapping(pred, truth)
    mapped = np.array([mapping[int(p)] for p in pred])
    acc = float(np.count_nonzero(mapped == truth) / truth.size)
    return MetricReport(
        acc=acc,
        nmi=nmi_score(pred, truth),
        ari=ari_score(pred, truth),
        f1=macro_f1(mapped, truth),
        mapping=mapping,
    )
