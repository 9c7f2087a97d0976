"""Command line entry point.

Exit codes: 0 on success, 2 when the input fails validation (bad SFILES,
bad config, schema violations), 1 on any other error."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import evaluation, sfiles, syngen, training
from . import tokenizer as tok
from .graph import SchemaViolation, from_json, graph_to_dict
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .pipeline import CHECKPOINT_ENV_VAR, CompletionEngine, CompletionRequest, NoModelLoaded

VALIDATION_ERRORS = (
    tok.TokenizeError,
    sfiles.SfilesError,
    SchemaViolation,
    training.VocabMismatch,
    NoModelLoaded,
    ValueError,
)


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=3e-4)
    p.add_argument("--eval-interval", type=int, default=200)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves", help="write loss curves to this CSV file")


def _train_config(args) -> training.TrainConfig:
    return training.TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        eval_interval_steps=args.eval_interval,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowcomplete")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic flowsheet corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="generator config JSON file")
    p.add_argument("--shifted", action="store_true",
                   help="use the distribution-shifted generator settings")

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--test")

    p = sub.add_parser("split", help="split a corpus into train/val/test")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--val-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--fractions", default="0.8,0.1,0.1")

    p = sub.add_parser("train", help="train a model from scratch")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--embd", type=int, default=128)
    p.add_argument("--d-ff", type=int)
    p.add_argument("--context-length", type=int, default=256)
    p.add_argument("--positional", choices=("learned", "sinusoidal"), default="learned")
    p.add_argument("--dropout", type=float, default=0.1)
    _add_train_flags(p)

    p = sub.add_parser("finetune", help="continue training a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--extend-vocab", action="store_true")
    _add_train_flags(p)

    p = sub.add_parser("eval", help="perplexity of a checkpoint on corpora")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", action="append", required=True,
                   metavar="NAME=PATH or PATH")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("complete", help="autocomplete a flowsheet prefix")
    p.add_argument("--checkpoint", help=f"default from ${CHECKPOINT_ENV_VAR}")
    p.add_argument("--prefix", default="")
    p.add_argument("--strategy", choices=("greedy", "beam", "top_k", "top_p"),
                   default="beam")
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-new-tokens", type=int, default=128)
    p.add_argument("--num-return", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("parse", help="parse an SFILES string to graph JSON")
    p.add_argument("sfiles")
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("serialize", help="serialize graph JSON to SFILES")
    p.add_argument("graph", nargs="?", help="JSON file (default: standard input)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--checkpoint", help=f"default from ${CHECKPOINT_ENV_VAR}")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return ap


def _cmd_generate(args) -> int:
    if args.config:
        cfg = syngen.GeneratorConfig.from_file(args.config)
        cfg.seed = args.seed
    elif args.shifted:
        cfg = syngen.shifted_config(seed=args.seed)
    else:
        cfg = syngen.GeneratorConfig(seed=args.seed)
    corpus = syngen.generate_dataset(cfg, args.n)
    tok.write_corpus(args.out, corpus)
    print(f"wrote {len(corpus)} flowsheets to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    train = tok.read_corpus(args.train)
    val = tok.read_corpus(args.val) if args.val else []
    test = tok.read_corpus(args.test) if args.test else []
    print(json.dumps(asdict(evaluation.dataset_stats(train, val, test)), indent=2))
    return 0


def _cmd_split(args) -> int:
    fractions = tuple(float(x) for x in args.fractions.split(","))
    if len(fractions) != 3:
        raise ValueError("--fractions needs three comma-separated numbers")
    corpus = tok.read_corpus(args.corpus)
    tr, va, te = evaluation.split_dataset(corpus, fractions, seed=args.seed)
    for path, part in ((args.train_out, tr), (args.val_out, va), (args.test_out, te)):
        tok.write_corpus(path, part)
    print(f"split {len(corpus)} -> {len(tr)}/{len(va)}/{len(te)}")
    return 0


def _cmd_train(args) -> int:
    model_cfg = ModelConfig(
        n_layers=args.layers,
        n_heads=args.heads,
        n_embd=args.embd,
        d_ff=args.d_ff,
        context_length=args.context_length,
        positional=args.positional,
        dropout=args.dropout,
        vocab_size=5,  # replaced once the vocabulary is built
    )
    result = training.train(
        tok.read_corpus(args.train), tok.read_corpus(args.val),
        model_cfg, _train_config(args),
    )
    save_checkpoint(args.out, result.model, result.vocab,
                    metadata={"best_val_loss": result.best_val_loss,
                              "steps": result.steps})
    if args.curves:
        training.curves_to_csv(result.curves, args.curves)
    print(f"trained {result.steps} steps, best val loss "
          f"{result.best_val_loss:.4f}, checkpoint at {args.out}")
    return 0


def _cmd_finetune(args) -> int:
    model, vocab, _meta = load_checkpoint(args.checkpoint)
    result = training.finetune(
        model, vocab, tok.read_corpus(args.train), tok.read_corpus(args.val),
        _train_config(args), extend_vocab=args.extend_vocab,
    )
    save_checkpoint(args.out, result.model, result.vocab,
                    metadata={"best_val_loss": result.best_val_loss,
                              "steps": result.steps,
                              "finetuned_from": args.checkpoint})
    if args.curves:
        training.curves_to_csv(result.curves, args.curves)
    print(f"fine-tuned {result.steps} steps, best val loss "
          f"{result.best_val_loss:.4f}, checkpoint at {args.out}")
    return 0


def _cmd_eval(args) -> int:
    model, vocab, _meta = load_checkpoint(args.checkpoint)
    rep = evaluation.PerplexityReport()
    for spec in args.corpus:
        name, _, path = spec.rpartition("=")
        name = name or path
        pp = evaluation.perplexity(model, vocab, tok.read_corpus(path))
        rep.set("model", name, "all", pp)
    print(rep.to_json() if args.json else rep.to_text())
    return 0


def _cmd_complete(args) -> int:
    engine = CompletionEngine.from_checkpoint(args.checkpoint)
    req = CompletionRequest(
        sfiles_prefix=args.prefix,
        strategy=args.strategy,
        beam_width=args.beam_width,
        p=args.p,
        k=args.k,
        temperature=args.temperature,
        max_new_tokens=args.max_new_tokens,
        num_return=args.num_return,
        seed=args.seed,
        lenient=args.lenient,
        return_graphs=args.json,
    )
    response = engine.complete(req)
    if args.json:
        print(json.dumps({"prefix": response.prefix,
                          "candidates": [asdict(c) for c in response.candidates]},
                         indent=2))
    else:
        for c in response.candidates:
            mark = "ok " if c.valid else "BAD"
            print(f"{mark} {c.log_prob:9.3f}  {c.sfiles}")
    return 0


def _cmd_parse(args) -> int:
    mode = "lenient" if args.lenient else "strict"
    g = sfiles.parse(args.sfiles, mode=mode)
    print(json.dumps(graph_to_dict(g), indent=2))
    return 0


def _cmd_serialize(args) -> int:
    if args.graph:
        with open(args.graph, encoding="utf-8") as f:
            doc = f.read()
    else:
        doc = sys.stdin.read()
    print(sfiles.serialize(from_json(doc)))
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    serve(args.checkpoint, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "stats": _cmd_stats,
    "split": _cmd_split,
    "train": _cmd_train,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "complete": _cmd_complete,
    "parse": _cmd_parse,
    "serialize": _cmd_serialize,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
