"""Multi-kernel Gaussian MMD between event representations and the shift gate.

The gate statistic is computed once, before training, on mean-pooled word
embeddings of each post; weighting is enabled iff the distance d_k reaches
the threshold d*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, SampleSizeError
from .text import PAD_ID, EmbeddingTable, EventCorpus, Vocabulary, tokenize

N_KERNELS = 7


@dataclass
class KernelBank:
    """Squared bandwidths of the Gaussian kernel mixture (mean combination)."""
    sq_bandwidths: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.sq_bandwidths, dtype=np.float64)
        if np.any(b <= 0) or np.any(np.diff(b) <= 0):
            raise DegenerateDataError(
                "kernel bandwidths must be strictly positive and increasing")
        self.sq_bandwidths = b


@dataclass
class ShiftReport:
    d_k: float
    d_star: float
    gate_open: bool
    n_source: int
    n_target: int
    sq_bandwidths: list[float]

    def to_dict(self) -> dict:
        return {
            "d_k": self.d_k,
            "d_star": self.d_star,
            "gate_open": self.gate_open,
            "n_source": self.n_source,
            "n_target": self.n_target,
            "sq_bandwidths": self.sq_bandwidths,
        }


def post_representation(ids: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Mean of non-PAD token embeddings; zero vector for empty posts."""
    ids = np.asarray(ids)
    keep = ids != PAD_ID
    if not keep.any():
        return np.zeros(table.dim)
    return table.weights.data[ids[keep]].mean(axis=0)


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xx = (x ** 2).sum(axis=1, keepdims=True)
    yy = (y ** 2).sum(axis=1, keepdims=True)
    return np.maximum(xx + yy.T - 2.0 * (x @ y.T), 0.0)


def median_bandwidths(pairwise_sq_dists: np.ndarray,
                      n_kernels: int = N_KERNELS) -> KernelBank:
    """Median heuristic bank: sigma^2 in {median * 2^(j - n//2)}."""
    d = np.asarray(pairwise_sq_dists, dtype=np.float64).ravel()
    positive = d[d > 0]
    if positive.size == 0:
        raise DegenerateDataError("all pairwise distances are zero")
    base = float(np.median(positive))
    bank = base * 2.0 ** (np.arange(n_kernels) - n_kernels // 2)
    return KernelBank(sq_bandwidths=bank)


def _mean_kernel(sq_dists: np.ndarray, bank: KernelBank) -> np.ndarray:
    k = np.zeros_like(sq_dists)
    for s2 in bank.sq_bandwidths:
        k += np.exp(-sq_dists / (2.0 * s2))
    return k / len(bank.sq_bandwidths)


def mmd_squared(xs: np.ndarray, ys: np.ndarray, bank: KernelBank,
                allow_small: bool = False) -> float:
    """Biased V-statistic estimate of squared MMD under the kernel mixture."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if not allow_small and (len(xs) < 2 or len(ys) < 2):
        raise SampleSizeError(
            f"need at least 2 samples per side, got {len(xs)} and {len(ys)}")
    kxx = _mean_kernel(_pairwise_sq_dists(xs, xs), bank).mean()
    kyy = _mean_kernel(_pairwise_sq_dists(ys, ys), bank).mean()
    kxy = _mean_kernel(_pairwise_sq_dists(xs, ys), bank).mean()
    return float(kxx + kyy - 2.0 * kxy)


def corpus_representations(corpus: EventCorpus, vocab: Vocabulary,
                           table: EmbeddingTable) -> np.ndarray:
    reps = []
    for post in corpus.posts:
        ids = np.array([vocab.id_for(t) for t in tokenize(post.text)], dtype=np.int64)
        reps.append(post_representation(ids, table))
    return np.stack(reps)


def shift_gate(source: EventCorpus, target: EventCorpus, vocab: Vocabulary,
               table: EmbeddingTable, d_star: float = 0.8) -> ShiftReport:
    """Distance d_k = sqrt(max(0, MMD^2)) over post representations; gate on d_k >= d*."""
    xs = corpus_representations(source, vocab, table)
    ys = corpus_representations(target, vocab, table)
    pooled = np.concatenate([xs, ys], axis=0)
    bank = median_bandwidths(_pairwise_sq_dists(pooled, pooled))
    d_k = float(np.sqrt(max(0.0, mmd_squared(xs, ys, bank))))
    return ShiftReport(d_k=d_k, d_star=d_star, gate_open=d_k >= d_star,
                       n_source=len(xs), n_target=len(ys),
                       sq_bandwidths=[float(b) for b in bank.sq_bandwidths])
