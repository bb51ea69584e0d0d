"""Weighted adversarial event adaptation for fake-news detection."""

from .autodiff import Tensor, backward
from .data_synth import SynthSpec, generate, inject_anomalies
from .evaluation import MetricsReport, evaluate, export_weights
from .mmd import ShiftReport, mmd_squared, shift_gate
from .model import ModelParams, load_checkpoint, save_checkpoint
from .text import EventCorpus, Post, Vocabulary, build_vocab, load_corpus, save_corpus
from .training import TrainConfig, train

__all__ = [
    "Tensor", "backward",
    "SynthSpec", "generate", "inject_anomalies",
    "MetricsReport", "evaluate", "export_weights",
    "ShiftReport", "mmd_squared", "shift_gate",
    "ModelParams", "load_checkpoint", "save_checkpoint",
    "EventCorpus", "Post", "Vocabulary", "build_vocab",
    "load_corpus", "save_corpus",
    "TrainConfig", "train",
]

__version__ = "0.1.0"
