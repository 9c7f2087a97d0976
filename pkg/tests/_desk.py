"""Shared desk-scale artifacts for the slower tests: one pre-trained
checkpoint and one fine-tuned checkpoint, built on first use and cached
under .cache/ so repeated test runs skip the training time."""

from __future__ import annotations

import pathlib

from flowcomplete import syngen, training
from flowcomplete import tokenizer as tok
from flowcomplete.evaluation import split_dataset
from flowcomplete.model import ModelConfig, load_checkpoint, save_checkpoint

CACHE = pathlib.Path(__file__).resolve().parent.parent / ".cache" / "desk-v1"

CORPUS_SEED = 42
CORPUS_SIZE = 7953
SHIFTED_SEED = 7
SHIFTED_SIZE = 500

DESK_MODEL = dict(n_layers=4, n_heads=4, n_embd=128, context_length=256)
PRETRAIN = dict(batch_size=8, eval_interval_steps=200, patience=3,
                max_epochs=6, seed=0)
FINETUNE = dict(batch_size=2, eval_interval_steps=20, patience=20,
                max_epochs=10, seed=0)


def _splits(path: pathlib.Path, seed: int, size: int, shifted: bool):
    if not (path / "train.sfiles").exists():
        path.mkdir(parents=True, exist_ok=True)
        cfg = syngen.shifted_config(seed=seed) if shifted else syngen.GeneratorConfig(seed=seed)
        corpus = syngen.generate_dataset(cfg, size)
        tr, va, te = split_dataset(corpus, seed=0)
        for name, part in (("train", tr), ("val", va), ("test", te)):
            tok.write_corpus(path / f"{name}.sfiles", part)
    return tuple(tok.read_corpus(path / f"{n}.sfiles") for n in ("train", "val", "test"))


def desk_corpus():
    return _splits(CACHE / "corpus", CORPUS_SEED, CORPUS_SIZE, shifted=False)


def shifted_corpus():
    return _splits(CACHE / "shifted", SHIFTED_SEED, SHIFTED_SIZE, shifted=True)


def desk_checkpoint() -> pathlib.Path:
    ckpt = CACHE / "pretrained"
    if not (ckpt / "manifest.json").exists():
        tr, va, _te = desk_corpus()
        result = training.train(
            tr, va, ModelConfig(**DESK_MODEL), training.TrainConfig(**PRETRAIN)
        )
        save_checkpoint(ckpt, result.model, result.vocab,
                        metadata={"best_val_loss": result.best_val_loss,
                                  "steps": result.steps})
    return ckpt


def finetuned_checkpoint() -> pathlib.Path:
    ckpt = CACHE / "finetuned"
    if not (ckpt / "manifest.json").exists():
        model, vocab, _meta = load_checkpoint(desk_checkpoint())
        tr, va, _te = shifted_corpus()
        result = training.finetune(model, vocab, tr, va,
                                   training.TrainConfig(**FINETUNE))
        save_checkpoint(ckpt, result.model, result.vocab,
                        metadata={"best_val_loss": result.best_val_loss,
                                  "steps": result.steps})
    return ckpt
