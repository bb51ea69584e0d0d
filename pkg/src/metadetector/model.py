"""The four network heads: feature extractor, detector, event discriminator
behind a gradient-reversal node, and the pseudo-event discriminator on
detached features."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autodiff import (
    Tensor,
    concat,
    conv_text,
    dropout,
    grl,
    matmul,
    max_pool_full,
    relu,
    sigmoid,
    softmax_rows,
)
from .errors import CheckpointError, ConfigurationError
from .text import EmbeddingTable, Vocabulary

FEATURE_DIM = 32
DISC_HIDDEN = 32


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


@dataclass
class FeatureExtractorParams:
    """Per-window filter banks, the mixing layer, and the embedding table."""
    filters: list[Tensor]       # filters[h-1]: (n_c, d, h)
    conv_biases: list[Tensor]   # (n_c,)
    w_fc: Tensor                # (FEATURE_DIM, w_max * n_c)
    b_fc: Tensor                # (FEATURE_DIM,)
    embedding: EmbeddingTable

    @property
    def w_max(self) -> int:
        return len(self.filters)

    @property
    def n_filters(self) -> int:
        return self.filters[0].shape[0]

    def tensors(self) -> list[Tensor]:
        out = list(self.filters) + list(self.conv_biases) + [self.w_fc, self.b_fc]
        if self.embedding.trainable:
            out.append(self.embedding.weights)
        return out


@dataclass
class DetectorParams:
    w: Tensor  # (2, FEATURE_DIM)
    b: Tensor  # (2,)

    def tensors(self) -> list[Tensor]:
        return [self.w, self.b]


@dataclass
class DiscriminatorParams:
    w1: Tensor  # (hidden, in_dim)
    b1: Tensor
    w2: Tensor  # (1, hidden)
    b2: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class ModelParams:
    theta_f: FeatureExtractorParams
    theta_y: DetectorParams
    theta_e: DiscriminatorParams
    theta_pe: DiscriminatorParams
    vocab: Vocabulary
    k: int
    seed: int
    config_snapshot: dict = field(default_factory=dict)

    def trainable_tensors(self) -> list[Tensor]:
        return (self.theta_f.tensors() + self.theta_y.tensors()
                + self.theta_e.tensors() + self.theta_pe.tensors())


def init_feature_extractor(table: EmbeddingTable, n_filters: int, w_max: int,
                           rng: np.random.Generator,
                           feature_dim: int = FEATURE_DIM) -> FeatureExtractorParams:
    d = table.dim
    filters, biases = [], []
    for h in range(1, w_max + 1):
        filters.append(glorot_uniform(rng, (n_filters, d, h),
                                      fan_in=d * h, fan_out=n_filters))
        biases.append(Tensor(np.zeros(n_filters), requires_grad=True))
    pooled = w_max * n_filters
    return FeatureExtractorParams(
        filters=filters,
        conv_biases=biases,
        w_fc=glorot_uniform(rng, (feature_dim, pooled), fan_in=pooled, fan_out=feature_dim),
        b_fc=Tensor(np.zeros(feature_dim), requires_grad=True),
        embedding=table,
    )


def init_detector(rng: np.random.Generator,
                  feature_dim: int = FEATURE_DIM) -> DetectorParams:
    return DetectorParams(
        w=glorot_uniform(rng, (2, feature_dim), fan_in=feature_dim, fan_out=2),
        b=Tensor(np.zeros(2), requires_grad=True),
    )


def init_discriminator(rng: np.random.Generator, in_dim: int = FEATURE_DIM,
                       hidden: int = DISC_HIDDEN) -> DiscriminatorParams:
    return DiscriminatorParams(
        w1=glorot_uniform(rng, (hidden, in_dim), fan_in=in_dim, fan_out=hidden),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=glorot_uniform(rng, (1, hidden), fan_in=hidden, fan_out=1),
        b2=Tensor(np.zeros(1), requires_grad=True),
    )


def init_model(vocab: Vocabulary, table: EmbeddingTable, k: int, seed: int,
               n_filters: int = 20, w_max: int = 4,
               config_snapshot: Optional[dict] = None) -> ModelParams:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    return ModelParams(
        theta_f=init_feature_extractor(table, n_filters, w_max, rng),
        theta_y=init_detector(rng),
        theta_e=init_discriminator(rng),
        theta_pe=init_discriminator(rng),
        vocab=vocab,
        k=k,
        seed=seed,
        config_snapshot=dict(config_snapshot or {}),
    )


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return matmul(x, w.T) + b


def extract_features(batch: Tensor, theta_f: FeatureExtractorParams,
                     training: bool = False,
                     rng: Optional[np.random.Generator] = None,
                     dropout_rate: float = 0.0) -> Tensor:
    """Text-CNN feature map: conv per window, max-pool, dropout, relu(fc)."""
    k = batch.shape[-1]
    if k < theta_f.w_max:
        raise ConfigurationError(
            f"sequence length {k} shorter than largest window {theta_f.w_max}")
    pooled = [max_pool_full(conv_text(batch, f, b))
              for f, b in zip(theta_f.filters, theta_f.conv_biases)]
    c_temp = concat(pooled, axis=-1)
    c_temp = dropout(c_temp, dropout_rate, training, rng)
    return relu(linear(c_temp, theta_f.w_fc, theta_f.b_fc))


def detect(features: Tensor, theta_y: DetectorParams) -> Tensor:
    """Class probabilities per post; column 0 = fake, column 1 = real."""
    return softmax_rows(linear(features, theta_y.w, theta_y.b))


def _discriminator_head(features: Tensor, theta: DiscriminatorParams) -> Tensor:
    h = relu(linear(features, theta.w1, theta.b1))
    p = sigmoid(linear(h, theta.w2, theta.b2))
    return p.reshape((p.shape[0],))


def discriminate_event(features: Tensor, theta_e: DiscriminatorParams,
                       lam: float) -> Tensor:
    """Per-post probability of source origin, reversal gain ``lam`` below the head."""
    return _discriminator_head(grl(features, lam), theta_e)


def pseudo_discriminate(features: Tensor, theta_pe: DiscriminatorParams) -> Tensor:
    """Same head on detached features: no gradient reaches the extractor."""
    return _discriminator_head(features.detach(), theta_pe)


def count_parameters(params: ModelParams) -> int:
    return sum(t.size for t in params.trainable_tensors())


# -- checkpointing -------------------------------------------------------------

_CHECKPOINT_VERSION = 1


def vocab_hash(vocab: Vocabulary) -> str:
    payload = json.dumps(vocab.tokens_by_id, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _array_map(params: ModelParams) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for i, (f, b) in enumerate(zip(params.theta_f.filters, params.theta_f.conv_biases)):
        arrays[f"f_filter_{i}"] = f.data
        arrays[f"f_bias_{i}"] = b.data
    arrays["f_w_fc"] = params.theta_f.w_fc.data
    arrays["f_b_fc"] = params.theta_f.b_fc.data
    arrays["embedding"] = params.theta_f.embedding.weights.data
    arrays["y_w"] = params.theta_y.w.data
    arrays["y_b"] = params.theta_y.b.data
    for name, disc in (("e", params.theta_e), ("pe", params.theta_pe)):
        arrays[f"{name}_w1"] = disc.w1.data
        arrays[f"{name}_b1"] = disc.b1.data
        arrays[f"{name}_w2"] = disc.w2.data
        arrays[f"{name}_b2"] = disc.b2.data
    return arrays


def save_checkpoint(params: ModelParams, path: str) -> None:
    meta = {
        "version": _CHECKPOINT_VERSION,
        "seed": params.seed,
        "k": params.k,
        "w_max": params.theta_f.w_max,
        "n_filters": params.theta_f.n_filters,
        "embedding_trainable": params.theta_f.embedding.trainable,
        "vocab_tokens": params.vocab.tokens_by_id,
        "vocab_min_count": params.vocab.min_count,
        "vocab_hash": vocab_hash(params.vocab),
        "config": params.config_snapshot,
    }
    arrays = _array_map(params)
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: str) -> ModelParams:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["__meta__"]))
        if meta.get("version") != _CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {meta.get('version')!r}")
        vocab = Vocabulary(
            token_to_id={t: i for i, t in enumerate(meta["vocab_tokens"])},
            min_count=meta["vocab_min_count"],
        )
        if vocab_hash(vocab) != meta["vocab_hash"]:
            raise CheckpointError("vocabulary hash mismatch; checkpoint is corrupt")
        emb = npz["embedding"]
        if emb.shape[0] != len(vocab):
            raise CheckpointError(
                f"embedding rows {emb.shape[0]} != vocabulary size {len(vocab)}")
        table = EmbeddingTable(Tensor(emb, requires_grad=meta["embedding_trainable"]),
                               trainable=meta["embedding_trainable"])
        w_max, n_filters, d = meta["w_max"], meta["n_filters"], emb.shape[1]
        filters, biases = [], []
        for i in range(w_max):
            f = npz[f"f_filter_{i}"]
            if f.shape != (n_filters, d, i + 1):
                raise CheckpointError(
                    f"filter bank {i} has shape {f.shape}, expected {(n_filters, d, i + 1)}")
            filters.append(Tensor(f, requires_grad=True))
            biases.append(Tensor(npz[f"f_bias_{i}"], requires_grad=True))
        w_fc = npz["f_w_fc"]
        if w_fc.shape[1] != w_max * n_filters:
            raise CheckpointError(
                f"mixing layer expects {w_max * n_filters} inputs, found {w_fc.shape[1]}")
        theta_f = FeatureExtractorParams(
            filters=filters, conv_biases=biases,
            w_fc=Tensor(w_fc, requires_grad=True),
            b_fc=Tensor(npz["f_b_fc"], requires_grad=True),
            embedding=table,
        )
        theta_y = DetectorParams(w=Tensor(npz["y_w"], requires_grad=True),
                                 b=Tensor(npz["y_b"], requires_grad=True))
        discs = {}
        for name in ("e", "pe"):
            discs[name] = DiscriminatorParams(
                w1=Tensor(npz[f"{name}_w1"], requires_grad=True),
                b1=Tensor(npz[f"{name}_b1"], requires_grad=True),
                w2=Tensor(npz[f"{name}_w2"], requires_grad=True),
                b2=Tensor(npz[f"{name}_b2"], requires_grad=True),
            )
        return ModelParams(theta_f=theta_f, theta_y=theta_y,
                           theta_e=discs["e"], theta_pe=discs["pe"],
                           vocab=vocab, k=meta["k"], seed=meta["seed"],
                           config_snapshot=meta["config"])
