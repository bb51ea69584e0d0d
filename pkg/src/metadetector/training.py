"""Losses, the weighting rule, batch scheduling, and the joint SGD loop.

The event discriminator descends on its loss while the reversal node
routes -lambda times that gradient into the feature extractor, so the
min-max game runs inside a single descent pass. Source-post weights come
from the pseudo head (w = 1 - w_hat) whenever the shift gate is open.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterator, Optional

import numpy as np

from .autodiff import Tensor, backward
from .errors import ConfigurationError, ContractError, NumericalError
from .mmd import ShiftReport, shift_gate
from .model import (
    ModelParams,
    detect,
    discriminate_event,
    extract_features,
    init_model,
    pseudo_discriminate,
)
from .text import (
    EmbeddingTable,
    EventCorpus,
    build_vocab,
    choose_k,
    encode,
    load_pretrained_vectors,
)

WEIGHTING_MODES = ("auto", "always_on", "always_off")


@dataclass
class TrainConfig:
    lambda_: float = 1.0
    mu: float = 1.0
    d_star: float = 0.8
    lr: float = 0.01
    batch_size: int = 100
    epochs: int = 100
    dropout: float = 0.2
    seed: int = 0
    freeze_embeddings: bool = False
    weighting_override: str = "auto"
    embedding_dim: int = 32
    n_filters: int = 20
    w_max: int = 4
    min_count: int = 1
    k: Optional[int] = None
    pretrained_vectors: Optional[str] = None

    def __post_init__(self):
        if self.batch_size % 2 != 0 or self.batch_size < 2:
            raise ConfigurationError(
                f"batch_size must be a positive even integer, got {self.batch_size}")
        if self.lr <= 0 or self.epochs < 1:
            raise ConfigurationError("lr must be positive and epochs >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lambda_ < 0 or self.mu < 0:
            raise ConfigurationError("lambda and mu must be non-negative")
        if self.weighting_override not in WEIGHTING_MODES:
            raise ConfigurationError(
                f"weighting_override must be one of {WEIGHTING_MODES}")

    @classmethod
    def from_file(cls, path: str) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


@dataclass
class WeightVector:
    values: np.ndarray
    mode: str  # "gated_weights" | "all_ones"


@dataclass
class EpochRecord:
    epoch: int
    loss_detection: float
    loss_event: float
    loss_pseudo: float
    source_accuracy: float
    target_accuracy: Optional[float]
    weight_mean: float
    weight_min: float
    weight_max: float


# -- losses ---------------------------------------------------------------


def loss_detection_weighted(probs: Tensor, labels: np.ndarray,
                            weights: np.ndarray) -> Tensor:
    """Weighted two-class cross-entropy, mean over the batch."""
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    n = probs.shape[0]
    if len(labels) != n or len(weights) != n:
        raise ContractError(
            f"got {n} rows but {len(labels)} labels / {len(weights)} weights")
    onehot = np.zeros((n, 2))
    onehot[np.arange(n), labels] = 1.0
    picked = (probs * Tensor(onehot)).sum(axis=1)
    return -(picked.log() * Tensor(weights)).mean()


def loss_event_weighted(src_probs: Tensor, tgt_probs: Tensor,
                        weights: np.ndarray) -> Tensor:
    """Binary cross-entropy with per-source-post weights (source = class 1)."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != src_probs.shape[0]:
        raise ContractError(
            f"{src_probs.shape[0]} source probs but {len(weights)} weights")
    src_term = (src_probs.log() * Tensor(weights)).mean()
    tgt_term = (1.0 - tgt_probs).log().mean()
    return -(src_term + tgt_term)


def loss_pseudo(src_probs: Tensor, tgt_probs: Tensor) -> Tensor:
    """Unweighted event cross-entropy for the pseudo head."""
    return loss_event_weighted(src_probs, tgt_probs,
                               np.ones(src_probs.shape[0]))


def total_loss(l_yw: Tensor, l_pe: Tensor, l_ew: Tensor, mu: float) -> Tensor:
    """Forward combination; the -lambda coupling lives in the reversal node."""
    return l_yw + mu * l_pe + l_ew


def compute_weights(pseudo_probs: np.ndarray, gate_open: bool,
                    override: str = "auto") -> WeightVector:
    """w = 1 - w_hat when weighting is active, all-ones otherwise."""
    if override not in WEIGHTING_MODES:
        raise ConfigurationError(f"override must be one of {WEIGHTING_MODES}")
    probs = np.asarray(pseudo_probs, dtype=np.float64)
    active = override == "always_on" or (override == "auto" and gate_open)
    if active:
        return WeightVector(values=1.0 - probs, mode="gated_weights")
    return WeightVector(values=np.ones_like(probs), mode="all_ones")


# -- batch scheduling ------------------------------------------------------


def make_batches(n_source: int, n_target: int, batch_size: int,
                 rng: np.random.Generator) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """One epoch of half/half index batches; the shorter side cycles."""
    half = batch_size // 2
    if n_source < half or n_target < half:
        raise ConfigurationError(
            f"corpora ({n_source}, {n_target}) smaller than half-batch {half}")
    n_batches = math.ceil(max(n_source, n_target) / half)
    needed = n_batches * half

    def stream(n: int) -> np.ndarray:
        idx = rng.permutation(n)
        while len(idx) < needed:
            idx = np.concatenate([idx, rng.permutation(n)])
        return idx[:needed]

    src, tgt = stream(n_source), stream(n_target)
    for b in range(n_batches):
        yield src[b * half:(b + 1) * half], tgt[b * half:(b + 1) * half]


def sgd_step(tensors: list[Tensor], lr: float) -> None:
    """Plain SGD update, then zero the gradients."""
    for t in tensors:
        if t.requires_grad:
            t.data -= lr * t.grad
        t.zero_grad()


# -- training loop ---------------------------------------------------------


def _check_finite(name: str, value: float, epoch: int) -> float:
    if not np.isfinite(value):
        raise NumericalError(f"non-finite {name} at epoch {epoch}")
    return value


def _eval_accuracy(params: ModelParams, ids: np.ndarray, labels: np.ndarray,
                   chunk: int = 500) -> float:
    from .text import embed  # local import to avoid cycle noise
    correct = 0
    for start in range(0, len(ids), chunk):
        x = embed(ids[start:start + chunk], params.theta_f.embedding)
        feats = extract_features(x, params.theta_f, training=False)
        probs = detect(feats, params.theta_y)
        correct += int((probs.data.argmax(axis=1) == labels[start:start + chunk]).sum())
    return correct / len(ids)


def train(source: EventCorpus, target: EventCorpus,
          config: TrainConfig) -> tuple[ModelParams, list[EpochRecord], ShiftReport]:
    """Full adversarial training run; deterministic given ``config.seed``."""
    for post in source.posts:
        if post.label is None:
            raise ContractError(f"source post {post.id!r} is unlabeled")

    ss = np.random.SeedSequence(config.seed)
    batch_seq, drop_seq, emb_seq = ss.spawn(3)
    batch_rng = np.random.default_rng(batch_seq)
    drop_rng = np.random.default_rng(drop_seq)

    vocab = build_vocab([source, target], min_count=config.min_count)
    k = config.k if config.k is not None else choose_k([source, target])
    if config.pretrained_vectors:
        table = load_pretrained_vectors(config.pretrained_vectors, vocab,
                                        np.random.default_rng(emb_seq),
                                        trainable=not config.freeze_embeddings)
    else:
        table = EmbeddingTable.random_init(len(vocab), config.embedding_dim,
                                           np.random.default_rng(emb_seq),
                                           trainable=not config.freeze_embeddings)

    params = init_model(vocab, table, k, config.seed,
                        n_filters=config.n_filters, w_max=config.w_max,
                        config_snapshot=asdict(config))
    shift = shift_gate(source, target, vocab, table, d_star=config.d_star)

    from .text import embed
    ids_s = np.stack([encode(p, vocab, k) for p in source.posts])
    y_s = np.array([p.label for p in source.posts], dtype=np.int64)
    ids_t = np.stack([encode(p, vocab, k) for p in target.posts])
    target_labeled = all(p.label is not None for p in target.posts)
    y_t = (np.array([p.label for p in target.posts], dtype=np.int64)
           if target_labeled else None)

    trainables = params.trainable_tensors()
    history: list[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        sums = {"yw": 0.0, "ew": 0.0, "pe": 0.0}
        n_batches = 0
        correct = 0
        seen = 0
        wmin, wmax, wsum, wcount = math.inf, -math.inf, 0.0, 0

        for src_idx, tgt_idx in make_batches(len(source), len(target),
                                             config.batch_size, batch_rng):
            x_s = embed(ids_s[src_idx], table)
            x_t = embed(ids_t[tgt_idx], table)
            feats_s = extract_features(x_s, params.theta_f, training=True,
                                       rng=drop_rng, dropout_rate=config.dropout)
            feats_t = extract_features(x_t, params.theta_f, training=True,
                                       rng=drop_rng, dropout_rate=config.dropout)

            pe_s = pseudo_discriminate(feats_s, params.theta_pe)
            pe_t = pseudo_discriminate(feats_t, params.theta_pe)
            l_pe = loss_pseudo(pe_s, pe_t)

            wv = compute_weights(pe_s.data, shift.gate_open,
                                 config.weighting_override)

            probs = detect(feats_s, params.theta_y)
            l_yw = loss_detection_weighted(probs, y_s[src_idx], wv.values)

            e_s = discriminate_event(feats_s, params.theta_e, config.lambda_)
            e_t = discriminate_event(feats_t, params.theta_e, config.lambda_)
            l_ew = loss_event_weighted(e_s, e_t, wv.values)

            sums["yw"] += _check_finite("detection loss", l_yw.item(), epoch)
            sums["ew"] += _check_finite("event loss", l_ew.item(), epoch)
            sums["pe"] += _check_finite("pseudo loss", l_pe.item(), epoch)
            n_batches += 1

            backward(total_loss(l_yw, l_pe, l_ew, config.mu))
            sgd_step(trainables, config.lr)

            correct += int((probs.data.argmax(axis=1) == y_s[src_idx]).sum())
            seen += len(src_idx)
            wmin = min(wmin, float(wv.values.min()))
            wmax = max(wmax, float(wv.values.max()))
            wsum += float(wv.values.sum())
            wcount += len(wv.values)

        target_acc = (_eval_accuracy(params, ids_t, y_t)
                      if target_labeled else None)
        history.append(EpochRecord(
            epoch=epoch,
            loss_detection=sums["yw"] / n_batches,
            loss_event=sums["ew"] / n_batches,
            loss_pseudo=sums["pe"] / n_batches,
            source_accuracy=correct / seen,
            target_accuracy=target_acc,
            weight_mean=wsum / wcount,
            weight_min=wmin,
            weight_max=wmax,
        ))

    return params, history, shift


HISTORY_COLUMNS = ["epoch", "loss_detection", "loss_event", "loss_pseudo",
                   "source_accuracy", "target_accuracy",
                   "weight_mean", "weight_min", "weight_max"]


def history_to_csv(history: list[EpochRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for rec in history:
            row = [getattr(rec, c) for c in HISTORY_COLUMNS]
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                             for v in row])
