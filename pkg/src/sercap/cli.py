"""Command-line entry points.

Subcommands: synth-data, train, decode, evaluate, ablate, gradcheck,
plot.  Every command exits nonzero on a failed invariant or a NaN
abort.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import ExperimentConfig, parse_config
from .data import EventGrammar, dataset_stats, generate_split, load_features, save_captions, save_features
from .decoding import DecodeConfig, beam_search
from .harness import NanLossError, plot_curves, restore_model, run_ablation, train
from .metrics import EvalItem, FluencyLexicons, evaluate_corpus
from .model import SentenceEncoder
from .text import build_vocab, detokenize, load_stopwords


def _cmd_synth_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grammar = EventGrammar(d_enc=args.d_enc, seed=args.grammar_seed)
    splits = {
        "train": (args.seed, args.n_train, 1),
        "val": (args.seed + 1000, args.n_val, 5),
        "test": (args.seed + 2000, args.n_test, 5),
    }
    summary = {}
    for name, (seed, n, refs) in splits.items():
        clips = generate_split(grammar, seed, n, refs, args.noise_sigma, args.frames, prefix=name)
        save_features(clips, out / f"{name}_features.bin")
        save_captions(clips, out / f"{name}_captions.jsonl")
        summary[name] = dataset_stats(clips)
    (out / "stats.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote train/val/test splits to {out}")
    return 0


def _cmd_train(args) -> int:
    config = parse_config(args.config) if args.config else ExperimentConfig()
    if args.epochs is not None:
        config.optim.epochs = args.epochs
    if args.seed is not None:
        config.seed = args.seed
    try:
        result = train(config, args.out, resume_from=args.resume)
    except NanLossError as err:
        print(f"training aborted: {err}", file=sys.stderr)
        return 2
    print(f"best epoch {result.best_epoch} (validation FENSE {result.best_fense:.6f})")
    print(f"checkpoints: {result.best_ckpt} {result.last_ckpt}")
    return 0


def _cmd_decode(args) -> int:
    model, encoder, vocab, sent_vocab, config = restore_model(args.checkpoint)
    features = load_features(args.features)
    stopwords = load_stopwords(args.stopwords) if args.stopwords else load_stopwords(
        config.decode.stopwords_file or None
    )
    cfg = DecodeConfig(
        beam_size=args.beam if args.beam is not None else config.decode.beam_size,
        min_len=args.min_len if args.min_len is not None else config.decode.min_len,
        max_len=args.max_len if args.max_len is not None else config.decode.max_len,
        stopwords=stopwords,
    )
    lines, sidecar = [], []
    for i in range(features.shape[0]):
        memory = model.encode_project(features[i]).data
        hyp = beam_search(memory, model, cfg, vocab)
        caption = detokenize(hyp.tokens, vocab)
        lines.append(caption)
        sidecar.append({"index": i, "caption": caption, "log_prob": hyp.log_prob,
                        "tokens": hyp.tokens})
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n")
    out.with_suffix(out.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"decoded {features.shape[0]} clips -> {out}")
    return 0


def _read_references(path: str | Path) -> list[list[str]]:
    groups = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        groups.append(list(rec["references"] if isinstance(rec, dict) else rec))
    return groups


def _cmd_evaluate(args) -> int:
    candidates = [l for l in Path(args.candidates).read_text().splitlines() if l.strip()]
    references = _read_references(args.references)
    if len(candidates) != len(references):
        print(f"{len(candidates)} candidates vs {len(references)} reference groups", file=sys.stderr)
        return 1
    items = [EvalItem(c, refs) for c, refs in zip(candidates, references)]
    spice = None
    if args.spice_scores:
        payload = json.loads(Path(args.spice_scores).read_text())
        spice = payload["per_item"] if isinstance(payload, dict) else list(payload)

    all_caps = candidates + [r for refs in references for r in refs]
    vocab = build_vocab(all_caps, kind="subword", target_size=args.vocab_size)
    encoder = SentenceEncoder(vocab.size, d_sent=args.d_sent, seed=args.encoder_seed)
    from .harness import sentence_embedder

    embed = sentence_embedder(encoder, vocab)
    report = evaluate_corpus(items, embedder=embed, lexicons=FluencyLexicons.default(),
                             spice_per_item=spice)
    report.save(args.out)
    print(json.dumps({k: v for k, v in report.to_dict().items() if k != "per_item"}, indent=2))
    return 0


def _cmd_ablate(args) -> int:
    config = parse_config(args.config) if args.config else ExperimentConfig()
    report = run_ablation(config, args.out, n_seeds=args.seeds)
    failed = [k for k, c in report["cells"].items() if c["status"] != "ok"]
    print((Path(args.out) / "ablation.md").read_text())
    if failed:
        print(f"failed cells: {failed}", file=sys.stderr)
        return 1
    return 0


def _cmd_gradcheck(args) -> int:
    worst = 0.0
    failures = []
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)

        def t(shape, scale=1.0):
            return Tensor(rng.normal(0, scale, shape), requires_grad=True)

        checks = {
            "matmul": (lambda a, b: ad.matmul(a, b).sum(), [t((3, 4)), t((4, 2))]),
            "matmul_batched": (lambda a, b: ad.matmul(a, b).mean(), [t((2, 3, 4)), t((4, 2))]),
            "arith": (lambda a, b: (a * b + a - b).sum(), [t((3, 2)), t((3, 2))]),
            "div": (
                lambda a, b: (a / b).sum(),
                [t((2, 2)), Tensor(rng.uniform(0.5, 2, (2, 2)), requires_grad=True)],
            ),
            "softmax": (lambda a: (ad.softmax(a) * a).sum(), [t((3, 5))]),
            "log_softmax": (lambda a: (ad.log_softmax(a) * a).sum(), [t((3, 5))]),
            "layer_norm": (
                lambda a, g, b: (ad.layer_norm(a, g, b, 1e-5) * ad.layer_norm(a, g, b, 1e-5)).sum(),
                [t((3, 4)), t((4,)), t((4,))],
            ),
            "gelu": (lambda a: ad.gelu(a).sum(), [t((6,))]),
            "embedding": (
                lambda tab: (
                    ad.embedding_lookup(tab, np.array([0, 2, 2]))
                    * ad.embedding_lookup(tab, np.array([0, 2, 2]))
                ).sum(),
                [t((4, 3))],
            ),
            "dropout": (
                lambda a: ad.dropout(a, 0.4, True, np.random.default_rng(7)).sum(),
                [t((5, 5))],
            ),
            "gather": (lambda a: ad.gather_last(a, np.array([1, 0, 2])).sum(), [t((3, 4))]),
            "abs": (lambda a: ad.absolute(a).sum(), [Tensor(rng.normal(0, 1, (5,)) + 0.3, requires_grad=True)]),
            "sqrt": (lambda a: ad.sqrt(a).sum(), [Tensor(rng.uniform(0.5, 2, (4,)), requires_grad=True)]),
            "exp_log": (lambda a: (ad.exp(a) * ad.log(ad.exp(a))).sum(), [t((3,))]),
            "concat": (lambda a: ad.concat([a, a * 2.0], axis=0).sum(), [t((2, 2))]),
            "reshape_permute": (lambda a: a.transpose((1, 0)).reshape(6).mean(), [t((2, 3))]),
        }
        for name, (f, inputs) in checks.items():
            report = ad.grad_check(f, inputs, eps=args.eps, rtol=args.rtol)
            worst = max(worst, report.max_rel_error)
            if not report.passed:
                failures.append((seed, name, report.max_rel_error))
    print(f"gradcheck over {args.seeds} seeds: max relative error {worst:.3e} (rtol {args.rtol})")
    if failures:
        for seed, name, err in failures:
            print(f"  FAIL seed={seed} op={name} err={err:.3e}", file=sys.stderr)
        return 1
    return 0


def _cmd_plot(args) -> int:
    plot_curves(args.curves, args.out_csv, args.out_png)
    print(f"wrote {args.out_csv}" + (f" and {args.out_png}" if args.out_png else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sercap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic corpus splits")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grammar-seed", type=int, default=7)
    p.add_argument("--n-train", type=int, default=512)
    p.add_argument("--n-val", type=int, default=64)
    p.add_argument("--n-test", type=int, default=64)
    p.add_argument("--noise-sigma", type=float, default=2.0)
    p.add_argument("--frames", type=int, default=31)
    p.add_argument("--d-enc", type=int, default=64)
    p.set_defaults(func=_cmd_synth_data)

    p = sub.add_parser("train", help="train one run from a config file")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--resume")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="caption a feature container with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int)
    p.add_argument("--min-len", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--stopwords")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("evaluate", help="score candidates against grouped references")
    p.add_argument("--candidates", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--spice-scores")
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--d-sent", type=int, default=768)
    p.add_argument("--encoder-seed", type=int, default=9001)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="run the tokenizer x lambda x wd grid")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference checks over the op set")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--rtol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("plot", help="merge learning curves to CSV (and optional PNG)")
    p.add_argument("--curves", nargs="+", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-png")
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
