"""Shared numerical helpers: seeded generators, checked products and
finite-difference gradients.

All arrays are float64 numpy arrays; "matrix" below means a 2-d array.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

DTYPE = np.float64

# independent named streams derived from one experiment seed
STREAMS = {"init": 0, "pretrain": 1, "kmeans": 2, "train": 3, "synth": 4, "misc": 5}


def make_rng(seed: int, stream: str | int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator keyed on ``(seed, stream)``.

    Philox output is fixed by numpy's bit-generator contract, so draws are
    identical across runs and platforms for the same key.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    stream_id = STREAMS[stream] if isinstance(stream, str) else int(stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream_id])))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=DTYPE)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    return a


def check_finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        bad = int(np.size(a) - np.count_nonzero(np.isfinite(a)))
        raise FloatingPointError(f"{what}: {bad} non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with shape and finiteness checks."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return check_finite(a @ b, "matmul result")


def finite_difference_gradient(f: Callable[[np.ndarray], float], params, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``params``.

    ``params`` is a 1-d vector; it is not modified.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    p = np.array(params, dtype=DTYPE).ravel()
    grad = np.zeros_like(p)
    for k in range(p.size):
        orig = p[k]
        p[k] = orig + h
        fp = float(f(p.copy()))
        p[k] = orig - h
        fm = float(f(p.copy()))
        p[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value at coordinate {k}")
        grad[k] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b, floor: float = 1e-12) -> float:
    """Norm-wise relative error ``|a-b| / max(|a|, |b|, floor)``."""
    a = np.ravel(np.asarray(a, dtype=DTYPE))
    b = np.ravel(np.asarray(b, dtype=DTYPE))
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)


def pack(arrays: Mapping[str, np.ndarray]) -> np.ndarray:
    """Concatenate named arrays (in mapping order) into one flat vector."""
    if not arrays:
        return np.zeros(0, dtype=DTYPE)
    return np.concatenate([np.ravel(v) for v in arrays.values()]).astype(DTYPE)


def unpack(vec: np.ndarray, like: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Inverse of :func:`pack`, shaped after ``like``."""
    out, pos = {}, 0
    for key, ref in like.items():
        size = int(np.size(ref))
        out[key] = np.asarray(vec[pos:pos + size], dtype=DTYPE).reshape(np.shape(ref)).copy()
        pos += size
    if pos != len(vec):
        raise ValueError(f"vector length {len(vec)} does not match {pos} packed entries")
    return out
