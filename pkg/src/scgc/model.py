"""Fully connected autoencoder with a hand-written backward pass.

Layers compute ``h_k = act(h_{k-1} @ W_k + b_k)`` with ``W_k`` of shape
``(in, out)``. Hidden layers use ``activation``; the embedding layer and the
final reconstruction layer are linear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DTYPE, as_matrix

CHECKPOINT_FORMAT = 1
ACTIVATIONS = ("relu", "linear")

Layer = tuple[np.ndarray, np.ndarray]


@dataclass
class AutoencoderParams:
    encoder: list[Layer]
    decoder: list[Layer] = field(default_factory=list)
    activation: str = "relu"
    seed: int | None = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        _check_chain(self.encoder, "encoder")
        if self.decoder:
            _check_chain(self.decoder, "decoder")
            enc_dims = [w.shape[0] for w, _ in self.encoder] + [self.embed_dim]
            dec_dims = [w.shape[0] for w, _ in self.decoder] + [self.decoder[-1][0].shape[1]]
            if dec_dims != enc_dims[::-1]:
                raise ValueError(f"decoder dims {dec_dims} do not mirror encoder dims {enc_dims}")

    @property
    def input_dim(self) -> int:
        return self.encoder[0][0].shape[0]

    @property
    def embed_dim(self) -> int:
        return self.encoder[-1][0].shape[1]

    @property
    def has_decoder(self) -> bool:
        return bool(self.decoder)

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [w.shape[1] for w, _ in self.encoder]

    def named_arrays(self) -> dict[str, np.ndarray]:
        """Live views of every weight and bias keyed ``enc0.W``, ``dec1.b`` ..."""
        out = {}
        for prefix, layers in (("enc", self.encoder), ("dec", self.decoder)):
            for k, (w, b) in enumerate(layers):
                out[f"{prefix}{k}.W"] = w
                out[f"{prefix}{k}.b"] = b
        return out

    def num_parameters(self, part: str = "all") -> int:
        layers = {"all": self.encoder + self.decoder, "encoder": self.encoder, "decoder": self.decoder}[part]
        return sum(w.size + b.size for w, b in layers)

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams(
            [(w.copy(), b.copy()) for w, b in self.encoder],
            [(w.copy(), b.copy()) for w, b in self.decoder],
            self.activation,
            self.seed,
        )

    def encoder_only(self) -> "AutoencoderParams":
        """Copy without the decoder (the scgc-star network)."""
        p = self.copy()
        p.decoder = []
        return p


def _check_chain(layers: list[Layer], what: str) -> None:
    if not layers:
        raise ValueError(f"{what} needs at least one layer")
    for k, (w, b) in enumerate(layers):
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ValueError(f"{what} layer {k}: weight {w.shape} and bias {b.shape} disagree")
        if k and w.shape[0] != layers[k - 1][0].shape[1]:
            raise ValueError(f"{what} layer {k} expects {w.shape[0]} inputs, previous layer gives "
                             f"{layers[k - 1][0].shape[1]}")


def _dense(fan_in: int, fan_out: int, rng: np.random.Generator) -> Layer:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out, dtype=DTYPE)


def init_autoencoder(input_dim: int, hidden_dims, embed_dim: int, decoder: bool,
                     rng: np.random.Generator, activation: str = "relu",
                     seed: int | None = None) -> AutoencoderParams:
    """Uniform(+-sqrt(1/fan_in)) weights, zero biases.

    The decoder mirrors the encoder widths in reverse.
    """
    dims = [int(input_dim), *[int(h) for h in hidden_dims], int(embed_dim)]
    if min(dims) < 1:
        raise ValueError(f"all layer widths must be >= 1, got {dims}")
    enc = [_dense(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
    rdims = dims[::-1]
    dec = [_dense(a, b, rng) for a, b in zip(rdims[:-1], rdims[1:])] if decoder else []
    return AutoencoderParams(enc, dec, activation, seed)


def _act(a: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(a, 0.0) if activation == "relu" else a


def _forward(layers: list[Layer], h: np.ndarray, activation: str):
    inputs, pre = [], []
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        inputs.append(h)
        a = h @ w + b
        pre.append(a)
        h = a if k == last else _act(a, activation)
    return h, {"inputs": inputs, "pre": pre}


def encode_with_cache(params: AutoencoderParams, x):
    x = as_matrix(x, "x")
    if x.shape[1] != params.input_dim:
        raise ValueError(f"x has {x.shape[1]} columns, encoder expects {params.input_dim}")
    return _forward(params.encoder, x, params.activation)


def decode_with_cache(params: AutoencoderParams, z):
    if not params.has_decoder:
        raise ValueError("these parameters have no decoder (encoder-only model)")
    z = as_matrix(z, "z")
    if z.shape[1] != params.embed_dim:
        raise ValueError(f"z has {z.shape[1]} columns, decoder expects {params.embed_dim}")
    return _forward(params.decoder, z, params.activation)


def encode(params: AutoencoderParams, x) -> np.ndarray:
    return encode_with_cache(params, x)[0]


def decode(params: AutoencoderParams, z) -> np.ndarray:
    return decode_with_cache(params, z)[0]


def _backward_layers(layers: list[Layer], cache: dict, upstream: np.ndarray, activation: str,
                     prefix: str, grads: dict[str, np.ndarray]) -> np.ndarray:
    last = len(layers) - 1
    g = upstream
    for k in range(last, -1, -1):
        w, _ = layers[k]
        if k != last and activation == "relu":
            g = g * (cache["pre"][k] > 0.0)
        grads[f"{prefix}{k}.W"] = cache["inputs"][k].T @ g
        grads[f"{prefix}{k}.b"] = g.sum(axis=0)
        g = g @ w.T
    return g


def backward(params: AutoencoderParams, enc_cache: dict, dz=None,
             dec_cache: dict | None = None, dx_hat=None) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss with respect to every weight and bias.

    ``dz`` is the loss gradient on the embeddings from losses applied to them
    directly; ``dx_hat`` the gradient on the reconstruction. Decoder
    gradients come only from ``dx_hat``; the encoder receives ``dz`` plus
    whatever flows back through the decoder.
    """
    batch = enc_cache["inputs"][0].shape[0]
    z_shape = (batch, params.embed_dim)
    dz = np.zeros(z_shape, dtype=DTYPE) if dz is None else np.asarray(dz, dtype=DTYPE)
    if dz.shape != z_shape:
        raise ValueError(f"dz shape {dz.shape} does not match cached embeddings {z_shape}")
    grads: dict[str, np.ndarray] = {}
    if params.has_decoder:
        if dx_hat is not None:
            if dec_cache is None:
                raise ValueError("dx_hat given without a decoder cache")
            dx_hat = np.asarray(dx_hat, dtype=DTYPE)
            if dx_hat.shape != (batch, params.input_dim):
                raise ValueError(f"dx_hat shape {dx_hat.shape} does not match batch "
                                 f"{(batch, params.input_dim)}")
            dz = dz + _backward_layers(params.decoder, dec_cache, dx_hat, params.activation, "dec", grads)
        else:
            for k, (w, b) in enumerate(params.decoder):
                grads[f"dec{k}.W"] = np.zeros_like(w)
                grads[f"dec{k}.b"] = np.zeros_like(b)
    elif dx_hat is not None:
        raise ValueError("dx_hat given for an encoder-only model")
    _backward_layers(params.encoder, enc_cache, dz, params.activation, "enc", grads)
    return grads


@dataclass
class OptimizerState:
    """Adam moments keyed by parameter name."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: OptimizerState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def params_to_dict(params: AutoencoderParams, centroids=None, extra: dict | None = None) -> dict:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "dims": params.dims,
        "decoder": params.has_decoder,
        "activation": params.activation,
        "seed": params.seed,
        "arrays": {k: v.tolist() for k, v in params.named_arrays().items()},
    }
    if centroids is not None:
        doc["centroids"] = np.asarray(centroids).tolist()
    if extra:
        doc["extra"] = extra
    return doc


def params_from_dict(doc: dict):
    """Inverse of :func:`params_to_dict`; returns ``(params, centroids, extra)``."""
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    arrays = doc["arrays"]
    dims = [int(d) for d in doc["dims"]]

    def layers(prefix, widths):
        return [(np.asarray(arrays[f"{prefix}{k}.W"], dtype=DTYPE).reshape(a, b),
                 np.asarray(arrays[f"{prefix}{k}.b"], dtype=DTYPE).reshape(b))
                for k, (a, b) in enumerate(zip(widths[:-1], widths[1:]))]

    enc = layers("enc", dims)
    dec = layers("dec", dims[::-1]) if doc["decoder"] else []
    params = AutoencoderParams(enc, dec, doc["activation"], doc.get("seed"))
    centroids = np.asarray(doc["centroids"], dtype=DTYPE) if "centroids" in doc else None
    return params, centroids, doc.get("extra", {})


def save_checkpoint(path, params: AutoencoderParams, centroids=None, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, centroids, extra)))


def load_checkpoint(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return params_from_dict(json.loads(p.read_text()))
