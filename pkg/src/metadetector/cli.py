"""Command-line entry points: synth, mmd, train, eval, weights.

Exit codes: 0 success, 1 usage error, 2 data/contract error. Reporting
subcommands print a JSON object first, then an aligned human-readable
table where one exists.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict

import numpy as np

from .data_synth import SynthSpec, generate, inject_anomalies
from .errors import MetaDetectorError
from .evaluation import evaluate, export_weights
from .mmd import shift_gate
from .model import load_checkpoint, save_checkpoint
from .text import EmbeddingTable, build_vocab, load_corpus, save_corpus
from .training import TrainConfig, history_to_csv, train


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metadetector",
        description="Weighted adversarial event adaptation for fake-news detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-event corpus pair")
    _add_common(p)
    p.add_argument("--out-source", required=True)
    p.add_argument("--out-target", required=True)
    p.add_argument("--n-source", type=int, default=2000)
    p.add_argument("--n-target", type=int, default=2000)
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--signal-strength", type=float, default=0.8)
    p.add_argument("--fake-ratio", type=float, default=0.5)
    p.add_argument("--post-length", type=int, default=20)
    p.add_argument("--shared-vocab", type=int, default=200)
    p.add_argument("--specific-vocab", type=int, default=200)
    p.add_argument("--anomaly-fraction", type=float, default=0.0)

    p = sub.add_parser("mmd", help="shift report between two corpora")
    _add_common(p)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--d-star", type=float, default=0.8)
    p.add_argument("--embedding-dim", type=int, default=32)

    p = sub.add_parser("train", help="train on a source/target corpus pair")
    _add_common(p)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config", help="JSON file mirroring TrainConfig fields")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--history", help="per-epoch CSV path")
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--d-star", type=float)
    p.add_argument("--weighting", choices=["auto", "on", "off"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("eval", help="metrics of a checkpoint on a labeled corpus")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="write the JSON report here as well")
    p.add_argument("--csv")

    p = sub.add_parser("weights", help="rank source posts by learned weight")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--csv")

    return parser


def _cmd_synth(args) -> int:
    spec = SynthSpec(n_source=args.n_source, n_target=args.n_target,
                     shared_vocab_size=args.shared_vocab,
                     specific_vocab_size=args.specific_vocab,
                     shift=args.shift, signal_strength=args.signal_strength,
                     fake_ratio=args.fake_ratio, post_length=args.post_length,
                     seed=args.seed)
    source, target = generate(spec)
    if args.anomaly_fraction > 0:
        source = inject_anomalies(source, args.anomaly_fraction,
                                  seed=args.seed + 1, spec=spec)
    save_corpus(source, args.out_source)
    save_corpus(target, args.out_target)
    print(json.dumps({"n_source": len(source), "n_target": len(target),
                      "source_path": args.out_source,
                      "target_path": args.out_target}))
    return 0


def _cmd_mmd(args) -> int:
    source = load_corpus(args.source, role="source")
    target = load_corpus(args.target, role="target")
    vocab = build_vocab([source, target])
    table = EmbeddingTable.random_init(len(vocab), args.embedding_dim,
                                       np.random.default_rng(args.seed))
    report = shift_gate(source, target, vocab, table, d_star=args.d_star)
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_train(args) -> int:
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    overrides = {"lambda_": args.lambda_, "mu": args.mu, "d_star": args.d_star,
                 "epochs": args.epochs, "lr": args.lr,
                 "batch_size": args.batch_size, "seed": args.seed}
    if args.weighting is not None:
        overrides["weighting_override"] = {
            "auto": "auto", "on": "always_on", "off": "always_off"}[args.weighting]
    replacements = {k: v for k, v in overrides.items() if v is not None}
    config = TrainConfig(**{**asdict(config), **replacements})

    source = load_corpus(args.source, role="source")
    target = load_corpus(args.target, role="target")
    params, history, shift = train(source, target, config)
    save_checkpoint(params, args.out)
    if args.history:
        history_to_csv(history, args.history)
    last = history[-1]
    print(json.dumps({
        "checkpoint": args.out,
        "epochs": len(history),
        "shift": shift.to_dict(),
        "final_source_accuracy": last.source_accuracy,
        "final_target_accuracy": last.target_accuracy,
        "final_losses": {"detection": last.loss_detection,
                         "event": last.loss_event,
                         "pseudo": last.loss_pseudo},
    }))
    return 0


def _cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus, role="target")
    report = evaluate(params, corpus)
    payload = json.dumps(report.to_dict())
    print(payload)
    print(report.to_table(), file=sys.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "precision", "recall", "f1",
                             "tp", "fp", "tn", "fn"])
            for name, m in report.per_class.items():
                writer.writerow([name, m.precision, m.recall, m.f1,
                                 m.tp, m.fp, m.tn, m.fn])
    return 0


def _cmd_weights(args) -> int:
    params = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus, role="source")
    ranking = export_weights(params, corpus, top_n=args.top_n)
    print(json.dumps(ranking.to_dict()))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["post_id", "weight", "pseudo_prob", "excerpt"])
            for e in ranking.entries:
                writer.writerow([e.post_id, e.weight, e.pseudo_prob, e.excerpt])
    return 0


_COMMANDS = {"synth": _cmd_synth, "mmd": _cmd_mmd, "train": _cmd_train,
             "eval": _cmd_eval, "weights": _cmd_weights}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap per our contract
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except MetaDetectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
