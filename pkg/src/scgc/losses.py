"""Training objectives and their gradients.

Every ``*_grad`` function returns ``(value, gradient(s))``; the plain
variants return the value only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DTYPE, as_matrix

log = logging.getLogger(__name__)

VARIANTS = ("scgc", "scgc-star")
DENOM_GUARD = 1e-8  # printed in the loss definition
NUM_GUARD = 1e-8  # keeps -log finite for nodes with no positive weight

# Incremented once per zero-norm embedding row seen by pairwise_similarity.
degenerate_rows = 0


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 0.1
    tau: float = 0.5
    variant: str = "scgc-star"

    def __post_init__(self):
        for name in ("alpha", "beta", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass
class AssignmentDistributions:
    q: np.ndarray
    p: np.ndarray
    centroids: np.ndarray
    eta: float = 1.0


# --- reconstruction -------------------------------------------------------

def reconstruction_loss_grad(x, x_hat, reduction: str = "mean"):
    """Squared Frobenius error, divided by the row count for ``"mean"``."""
    x = as_matrix(x, "x")
    x_hat = as_matrix(x_hat, "x_hat")
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs x_hat {x_hat.shape}")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    scale = 1.0 / x.shape[0] if reduction == "mean" else 1.0
    diff = x_hat - x
    return float(scale * np.sum(diff * diff)), 2.0 * scale * diff


def reconstruction_loss(x, x_hat, reduction: str = "mean") -> float:
    return reconstruction_loss_grad(x, x_hat, reduction)[0]


# --- contrastive ----------------------------------------------------------

def _unit_rows(z: np.ndarray):
    norms = np.linalg.norm(z, axis=1)
    ok = norms > 0.0
    safe = np.where(ok, norms, 1.0)
    return z / safe[:, None] * ok[:, None], safe, ok


def pairwise_similarity(z, similarity: str = "cosine") -> np.ndarray:
    """Cosine (default) or raw dot-product similarity between all rows.

    Zero-norm rows get similarity 0 with everything under cosine, and bump the
    module-level ``degenerate_rows`` counter.
    """
    global degenerate_rows
    z = as_matrix(z, "z")
    if z.shape[0] < 2:
        raise ValueError("need at least two embeddings")
    if similarity == "dot":
        return z @ z.T
    if similarity != "cosine":
        raise ValueError(f"unknown similarity {similarity!r}")
    u, _, ok = _unit_rows(z)
    bad = int(np.count_nonzero(~ok))
    if bad:
        degenerate_rows += bad
        log.debug("%d zero-norm embedding rows", bad)
    return u @ u.T


def _similarity_backward(z: np.ndarray, g_s: np.ndarray, similarity: str) -> np.ndarray:
    """Gradient on ``z`` given the gradient on every entry of S = f(z) f(z)^T."""
    g_sym = g_s + g_s.T
    if similarity == "dot":
        return g_sym @ z
    u, norms, ok = _unit_rows(z)
    g_u = g_sym @ u
    radial = np.sum(g_u * u, axis=1, keepdims=True)
    return (g_u - radial * u) / norms[:, None] * ok[:, None]


def contrastive_loss_grad(z, gamma, tau: float, similarity: str = "cosine"):
    """Influence-weighted contrastive loss averaged over the batch.

    Row i contributes ``-log((NUM_GUARD + sum_j g_ij e^{S_ij/tau}) /
    (DENOM_GUARD + sum_k e^{S_ik/tau}))`` with ``j, k != i``. Returns
    ``(loss, dloss/dz)``.
    """
    z = as_matrix(z, "z")
    gamma = as_matrix(gamma, "gamma")
    b = z.shape[0]
    if b < 2:
        raise ValueError("contrastive loss needs a batch of at least 2 (no negatives otherwise)")
    if gamma.shape != (b, b):
        raise ValueError(f"gamma slice {gamma.shape} does not match batch of {b}")
    if not tau > 0:
        raise ValueError("tau must be > 0")

    s = pairwise_similarity(z, similarity)
    t = s / tau
    off = ~np.eye(b, dtype=bool)
    t_off = np.where(off, t, -np.inf)
    m = t_off.max(axis=1, keepdims=True)
    e = np.exp(t_off - m)  # zero on the diagonal
    w = np.where(off, gamma, 0.0)
    num_s = np.sum(w * e, axis=1)
    den_s = np.sum(e, axis=1)
    m1 = m[:, 0]
    # log(guard + sum) evaluated relative to the row max
    with np.errstate(divide="ignore"):
        log_num = np.logaddexp(np.log(NUM_GUARD), m1 + np.log(num_s))
    log_den = np.logaddexp(np.log(DENOM_GUARD), m1 + np.log(den_s))
    rows = log_den - log_num
    loss = float(rows.mean())

    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    w_num = np.exp(log_w + t_off - log_num[:, None])
    w_den = np.exp(t_off - log_den[:, None])
    g_t = (w_den - w_num) / b
    g_s = g_t / tau
    return loss, _similarity_backward(z, g_s, similarity)


def contrastive_loss(z, gamma, tau: float, similarity: str = "cosine") -> float:
    return contrastive_loss_grad(z, gamma, tau, similarity)[0]


# --- clustering -----------------------------------------------------------

def _sq_dist(z: np.ndarray, mu: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - mu[None, :, :]
    return np.sum(diff * diff, axis=2)


def soft_assign(z, centroids, eta: float = 1.0) -> np.ndarray:
    """Student-t soft assignment of each embedding to each centroid."""
    z = as_matrix(z, "z")
    mu = as_matrix(centroids, "centroids")
    if mu.shape[0] < 2:
        raise ValueError("need at least two centroids")
    if mu.shape[1] != z.shape[1]:
        raise ValueError(f"centroid dim {mu.shape[1]} != embedding dim {z.shape[1]}")
    if not eta > 0:
        raise ValueError("eta must be > 0")
    # log(1 + d/eta) via a rescaled distance so huge embeddings neither overflow nor hit 0/0
    diff = z[:, None, :] - mu[None, :, :]
    scale = np.abs(diff).max(axis=2, keepdims=True)
    scale[scale == 0] = 1.0
    with np.errstate(divide="ignore"):
        logd = 2.0 * np.log(scale[..., 0]) + np.log(np.sum((diff / scale) ** 2, axis=2))
    logk = -0.5 * (eta + 1.0) * np.logaddexp(0.0, logd - np.log(eta))
    logk -= logk.max(axis=1, keepdims=True)
    k = np.exp(logk)
    return k / k.sum(axis=1, keepdims=True)


def target_distribution(q) -> np.ndarray:
    """Square q, divide by soft cluster frequency, renormalise rows."""
    q = as_matrix(q, "q")
    freq = q.sum(axis=0)
    # a cluster with no mass gets no target mass
    weight = np.divide(q * q, freq, out=np.zeros_like(q), where=freq > 0)
    return weight / weight.sum(axis=1, keepdims=True)


def kl_cluster_loss(p, q, reduction: str = "sum") -> float:
    """KL(P || Q) summed over rows and clusters (``"mean"`` divides by rows)."""
    p = as_matrix(p, "p")
    q = as_matrix(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: p {p.shape} vs q {q.shape}")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    pos = p > 0
    if np.any(pos & (q <= 0)):
        raise ValueError("q has a zero where p is positive: divergence is infinite")
    terms = np.zeros_like(p)
    terms[pos] = p[pos] * (np.log(p[pos]) - np.log(q[pos]))
    total = float(terms.sum())
    return total / p.shape[0] if reduction == "mean" else total


def kl_cluster_loss_grad(z, centroids, p, eta: float = 1.0, reduction: str = "sum"):
    """KL(P || Q(z, centroids)) with P held fixed.

    Returns ``(loss, dloss/dz, dloss/dcentroids)``.
    """
    z = as_matrix(z, "z")
    mu = as_matrix(centroids, "centroids")
    p = as_matrix(p, "p")
    q = soft_assign(z, mu, eta)
    loss = kl_cluster_loss(p, q, reduction)
    scale = 1.0 / z.shape[0] if reduction == "mean" else 1.0
    # d loss / d log-kernel, then through the Student-t kernel
    g_logk = scale * (q * p.sum(axis=1, keepdims=True) - p)
    d = _sq_dist(z, mu)
    c = g_logk * (-(eta + 1.0) / (2.0 * (eta + d)))
    diff = z[:, None, :] - mu[None, :, :]
    dz = 2.0 * np.einsum("iu,iud->id", c, diff)
    dmu = -2.0 * np.einsum("iu,iud->ud", c, diff)
    return loss, dz, dmu


# --- joint objective ------------------------------------------------------

@dataclass
class LossBreakdown:
    total: float
    contrastive: float
    cluster: float
    recon: float | None = None


@dataclass
class LossGradients:
    z: np.ndarray
    centroids: np.ndarray
    x_hat: np.ndarray | None = None


def total_loss(z, centroids, p, gamma, weights: LossWeights, x=None, x_hat=None,
               eta: float = 1.0, similarity: str = "cosine",
               recon_reduction: str = "mean", kl_reduction: str = "mean"):
    """Weighted joint objective for one batch.

    scgc:      alpha * contrastive(single hop power) + beta * KL + recon
    scgc-star: alpha * contrastive(cumulative)       + beta * KL

    ``gamma`` must already be the batch slice of the influence matching the
    variant. Returns ``(LossBreakdown, LossGradients)``.
    """
    if weights.variant == "scgc":
        if x is None or x_hat is None:
            raise ValueError("scgc needs the batch input and its reconstruction")
    elif x_hat is not None:
        raise ValueError("scgc-star has no decoder; x_hat must not be supplied")

    l_con, dz_con = contrastive_loss_grad(z, gamma, weights.tau, similarity)
    l_kl, dz_kl, dmu = kl_cluster_loss_grad(z, centroids, p, eta, kl_reduction)
    total = weights.alpha * l_con + weights.beta * l_kl
    grads = LossGradients(weights.alpha * dz_con + weights.beta * dz_kl, weights.beta * dmu)
    breakdown = LossBreakdown(total, l_con, l_kl)
    if weights.variant == "scgc":
        l_rec, dxh = reconstruction_loss_grad(x, x_hat, recon_reduction)
        breakdown.recon = l_rec
        breakdown.total = total + l_rec
        grads.x_hat = dxh
    return breakdown, grads
