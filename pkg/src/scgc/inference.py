"""Inference on trained models.

Nothing here takes or imports graph structure: prediction needs only node
features, the network and the centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import hard_labels
from .core import as_matrix
from .losses import soft_assign
from .metrics import MetricReport, clustering_metrics
from .model import AutoencoderParams, encode


@dataclass
class ClusterModel:
    params: AutoencoderParams
    centroids: np.ndarray
    eta: float = 1.0

    def copy(self) -> "ClusterModel":
        return ClusterModel(self.params.copy(), self.centroids.copy(), self.eta)


@dataclass
class EvalResult:
    embeddings: np.ndarray
    q: np.ndarray
    labels: np.ndarray
    report: MetricReport | None = None


def evaluate(model: ClusterModel, x, truth=None) -> EvalResult:
    """Embed ``x``, soft-assign to the centroids and score against ``truth``."""
    x = as_matrix(x, "x")
    z = encode(model.params, x)
    q = soft_assign(z, model.centroids, model.eta)
    labels = hard_labels(q)
    report = clustering_metrics(labels, truth) if truth is not None else None
    return EvalResult(z, q, labels, report)


def write_embeddings(path, z: np.ndarray, labels=None) -> None:
    """TSV with one row per node: ``node``, optional ``cluster``, then ``z0..``."""
    z = np.asarray(z)
    cols = ["node"] + (["cluster"] if labels is not None else []) + [f"z{k}" for k in range(z.shape[1])]
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for i, row in enumerate(z):
            lead = [str(i)] + ([str(int(labels[i]))] if labels is not None else [])
            fh.write("\t".join(lead + [repr(float(v)) for v in row]) + "\n")
