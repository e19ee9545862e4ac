"""Run configuration and per-dataset presets."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .losses import VARIANTS, LossWeights


@dataclass
class TrainConfig:
    variant: str = "scgc-star"
    alpha: float = 1.0
    beta: float = 0.1
    tau: float = 0.5
    hops: int = 2
    eta: float = 1.0
    lr_pretrain: float = 1e-3
    lr_train: float = 1e-3
    pretrain_epochs: int = 30
    train_epochs: int = 200
    batch_size: int = 256
    full_batch: bool = True
    seed: int = 0
    cluster_count: int = 2
    ae_dims: list[int] = field(default_factory=lambda: [500, 500, 2000, 10])
    activation: str = "relu"
    similarity: str = "cosine"
    recon_reduction: str = "mean"
    kl_reduction: str = "mean"
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-4

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        LossWeights(self.alpha, self.beta, self.tau, self.variant)
        for name in ("eta", "lr_pretrain", "lr_train", "kmeans_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("hops", "pretrain_epochs", "train_epochs", "batch_size", "kmeans_max_iter"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.cluster_count, int) or self.cluster_count < 2:
            raise ValueError("cluster_count must be an integer >= 2")
        if len(self.ae_dims) < 2:
            raise ValueError("ae_dims needs at least one hidden layer and an embedding size")
        if any(not isinstance(d, int) or d < 1 for d in self.ae_dims):
            raise ValueError(f"ae_dims must be positive integers, got {self.ae_dims}")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.similarity not in ("cosine", "dot"):
            raise ValueError(f"unknown similarity {self.similarity!r}")
        for name in ("recon_reduction", "kl_reduction"):
            if getattr(self, name) not in ("mean", "sum"):
                raise ValueError(f"{name} must be 'mean' or 'sum'")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta, self.tau, self.variant)

    @property
    def hidden_dims(self) -> list[int]:
        return list(self.ae_dims[:-1])

    @property
    def embed_dim(self) -> int:
        return self.ae_dims[-1]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "K" in doc:
            # hop depth is reported as K alongside (alpha, tau)
            k = doc.pop("K")
            if "hops" in doc and doc["hops"] != k:
                raise ValueError("config gives both K and hops with different values")
            doc["hops"] = k
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "ae_dims" in doc:
            doc["ae_dims"] = list(doc["ae_dims"])
        return cls(**doc)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


# (alpha, K, tau) per dataset and variant, beta and learning rates per dataset
_HYPER = {
    "usps": {"scgc": (1.0, 4, 0.5), "scgc-star": (4.0, 4, 0.25)},
    "hhar": {"scgc": (1.0, 4, 2.25), "scgc-star": (1.0, 3, 2.25)},
    "reuters": {"scgc": (3.0, 3, 1.0), "scgc-star": (0.5, 3, 0.25)},
    "acm": {"scgc": (0.5, 2, 0.25), "scgc-star": (1.0, 1, 0.25)},
    "citeseer": {"scgc": (0.5, 1, 0.25), "scgc-star": (1.0, 1, 0.25)},
    "dblp": {"scgc": (1.0, 1, 0.25), "scgc-star": (1.0, 1, 0.25)},
}
_CLASSES = {"usps": 10, "hhar": 6, "reuters": 4, "acm": 3, "citeseer": 6, "dblp": 4}
_LR_PRETRAIN = {"reuters": 1e-4, "citeseer": 1e-4}
_LR_TRAIN = {"citeseer": 1e-4}
_BETA = {"hhar": 10.0}


def preset(dataset: str, variant: str = "scgc-star") -> TrainConfig:
    """Published hyper-parameters for one of the six benchmark datasets."""
    key = dataset.lower()
    if key not in _HYPER:
        raise ValueError(f"no preset for {dataset!r}; known: {sorted(_HYPER)}")
    alpha, hops, tau = _HYPER[key][variant]
    return TrainConfig(
        variant=variant,
        alpha=alpha,
        beta=_BETA.get(key, 0.1),
        tau=tau,
        hops=hops,
        lr_pretrain=_LR_PRETRAIN.get(key, 1e-3),
        lr_train=_LR_TRAIN.get(key, 1e-3),
        cluster_count=_CLASSES[key],
    )


PRESETS = sorted(_HYPER)
