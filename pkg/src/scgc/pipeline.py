"""Two-phase training: autoencoder pretraining with K-means centroid
initialisation, then joint structure/cluster optimisation."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .clustering import KMeansResult, hard_labels, kmeans
from .config import TrainConfig
from .core import as_matrix, make_rng
from .graph import InfluenceMatrix, SparseGraph, influence_for_variant
from .inference import ClusterModel, evaluate
from .metrics import clustering_metrics
from .losses import reconstruction_loss_grad, soft_assign, target_distribution, total_loss
from .model import (AutoencoderParams, OptimizerState, adam_step, backward, decode_with_cache,
                    encode, encode_with_cache, init_autoencoder)

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


class PretrainResult(NamedTuple):
    params: AutoencoderParams
    centroids: np.ndarray
    losses: list[float]
    kmeans: KMeansResult


@dataclass
class EpochRecord:
    epoch: int
    total: float
    contrastive: float
    cluster: float
    recon: float | None
    q_row_error: float
    p_row_error: float
    kl_min: float
    seconds: float
    steps: int
    metrics: dict | None = None


@dataclass
class RunHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r)) + "\n")


def sample_batch(n: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of ``batch_size`` node indices without replacement."""
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds node count {n}")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return rng.choice(n, size=batch_size, replace=False)


def _fresh_model(input_dim: int, config: TrainConfig) -> AutoencoderParams:
    return init_autoencoder(input_dim, config.hidden_dims, config.embed_dim, decoder=True,
                            rng=make_rng(config.seed, "init"), activation=config.activation,
                            seed=config.seed)


def pretrain(x, config: TrainConfig) -> PretrainResult:
    """Reconstruction-only autoencoder training, then K-means on the embeddings."""
    x = as_matrix(x, "x")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    n = x.shape[0]
    params = _fresh_model(x.shape[1], config)
    state = OptimizerState(lr=config.lr_pretrain)
    rng = make_rng(config.seed, "pretrain")
    losses = []
    for epoch in range(config.pretrain_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            xb = x[idx]
            z, enc_cache = encode_with_cache(params, xb)
            x_hat, dec_cache = decode_with_cache(params, z)
            loss, dxh = reconstruction_loss_grad(xb, x_hat, config.recon_reduction)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"pretraining loss diverged at epoch {epoch}, batch {b}")
            grads = backward(params, enc_cache, None, dec_cache, dxh)
            adam_step(state, params.named_arrays(), grads)
            epoch_loss += loss * len(idx)
        losses.append(epoch_loss / n)
        log.info("pretrain epoch %d recon %.6f", epoch, losses[-1])

    z = encode(params, x)
    km = kmeans(z, config.cluster_count, make_rng(config.seed, "kmeans"),
                config.kmeans_max_iter, config.kmeans_tol)
    return PretrainResult(params, km.centroids, losses, km)


def _row_error(m: np.ndarray) -> float:
    return float(np.abs(m.sum(axis=1) - 1.0).max())


def batch_objective(params: AutoencoderParams, centroids, xb, gamma_b, p_b, config: TrainConfig):
    """Joint loss on one batch and its gradient for every trainable array.

    Returns ``(LossBreakdown, grads)`` where ``grads`` is keyed like
    ``params.named_arrays()`` plus ``"centroids"``.
    """
    z, enc_cache = encode_with_cache(params, xb)
    x_hat = dec_cache = None
    if config.variant == "scgc":
        x_hat, dec_cache = decode_with_cache(params, z)
    parts, lg = total_loss(z, centroids, p_b, gamma_b, config.weights, x=xb, x_hat=x_hat,
                           eta=config.eta, similarity=config.similarity,
                           recon_reduction=config.recon_reduction, kl_reduction=config.kl_reduction)
    grads = backward(params, enc_cache, lg.z, dec_cache, lg.x_hat)
    grads["centroids"] = lg.centroids
    return parts, grads


def train(x, graph: SparseGraph, config: TrainConfig, params: AutoencoderParams, centroids,
          labels=None, influence: InfluenceMatrix | None = None):
    """Joint training for ``config.variant``; returns ``(ClusterModel, RunHistory)``.

    The influence matrix is built once up front unless supplied. P is
    recomputed from the full-data Q at the start of every epoch; centroids are
    optimised alongside the network weights.
    """
    x = as_matrix(x, "x")
    n = x.shape[0]
    if graph.n != n:
        raise ValueError(f"graph has {graph.n} nodes but x has {n} rows")
    if influence is None:
        influence = influence_for_variant(graph, config.variant, config.hops)
    if influence.n != n:
        raise ValueError("influence matrix size does not match x")

    star = config.variant == "scgc-star"
    params = params.encoder_only() if star else params.copy()
    if not star and not params.has_decoder:
        raise ValueError("scgc needs a decoder; got encoder-only parameters")
    model = ClusterModel(params, np.array(centroids, dtype=np.float64), config.eta)
    state = OptimizerState(lr=config.lr_train)
    rng = make_rng(config.seed, "train")
    full = config.full_batch or config.batch_size >= n
    steps_per_epoch = 1 if full else math.ceil(n / config.batch_size)
    history = RunHistory()

    z_all = None
    for epoch in range(config.train_epochs):
        t0 = time.perf_counter()
        if z_all is None:
            z_all = encode(params, x)
        q_all = soft_assign(z_all, model.centroids, config.eta)
        p_all = target_distribution(q_all)
        sums = {"total": 0.0, "contrastive": 0.0, "cluster": 0.0, "recon": 0.0}
        kl_min = math.inf
        steps = 0
        for b in range(steps_per_epoch):
            idx = np.arange(n) if full else sample_batch(n, config.batch_size, rng)
            if len(idx) < 2:
                log.warning("skipping batch of %d node(s) at epoch %d", len(idx), epoch)
                continue
            parts, grads = batch_objective(params, model.centroids, x[idx], influence.slice(idx),
                                           p_all[idx], config)
            if not math.isfinite(parts.total):
                raise TrainingDivergedError(
                    f"loss diverged at epoch {epoch}, batch {b}: {parts}")
            named = params.named_arrays()
            named["centroids"] = model.centroids
            adam_step(state, named, grads)

            kl_min = min(kl_min, parts.cluster)
            for k in ("total", "contrastive", "cluster"):
                sums[k] += getattr(parts, k)
            if parts.recon is not None:
                sums["recon"] += parts.recon
            steps += 1

        # embeddings under the updated weights; reused for next epoch's Q
        z_all = encode(params, x)
        metrics = None
        if labels is not None:
            report = clustering_metrics(hard_labels(soft_assign(z_all, model.centroids, config.eta)), labels)
            metrics = json.loads(report.to_json())
        denom = max(steps, 1)
        rec = EpochRecord(
            epoch=epoch,
            total=sums["total"] / denom,
            contrastive=sums["contrastive"] / denom,
            cluster=sums["cluster"] / denom,
            recon=None if star else sums["recon"] / denom,
            q_row_error=_row_error(q_all),
            p_row_error=_row_error(p_all),
            kl_min=kl_min,
            seconds=time.perf_counter() - t0,
            steps=steps,
            metrics=metrics,
        )
        history.records.append(rec)
        log.info("epoch %d loss %.5f (con %.5f, kl %.5f)%s", epoch, rec.total, rec.contrastive,
                 rec.cluster, f" acc {metrics['acc']:.4f}" if metrics else "")
    return model, history


@dataclass
class RunResult:
    pretrained: PretrainResult
    model: ClusterModel
    history: RunHistory
    baseline_report: object
    report: object


def run(x, graph: SparseGraph, config: TrainConfig, labels=None) -> RunResult:
    """Pretrain, train and evaluate in one call."""
    pre = pretrain(x, config)
    baseline = evaluate(ClusterModel(pre.params, pre.centroids, config.eta), x, labels)
    model, history = train(x, graph, config, pre.params, pre.centroids, labels)
    final = evaluate(model, x, labels)
    return RunResult(pre, model, history, baseline.report, final.report)

