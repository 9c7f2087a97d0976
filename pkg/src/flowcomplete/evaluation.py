"""Dataset splitting, corpus statistics, and perplexity evaluation."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from . import tokenizer as tok
from .model import DecoderLM
from .tokenizer import Vocabulary
from .training import encode_corpus, pad_batch, token_nll_sum

log = logging.getLogger(__name__)


class EmptyCorpus(ValueError):
    pass


@dataclass
class DatasetStats:
    samples_tr: int
    samples_val: int
    samples_te: int
    mean_nodes: float
    std_nodes: float
    vocab_size: int


def dataset_stats(
    train: list[str], val: list[str] | None = None, test: list[str] | None = None
) -> DatasetStats:
    val = val or []
    test = test or []
    everything = list(train) + list(val) + list(test)
    if not everything:
        raise EmptyCorpus("no samples")
    counts = []
    for s in everything:
        counts.append(sum(1 for t in tok.tokenize(s) if t.kind is tok.TokenKind.UNIT))
    vocab = tok.build_vocab(everything)
    return DatasetStats(
        samples_tr=len(train),
        samples_val=len(val),
        samples_te=len(test),
        mean_nodes=float(np.mean(counts)),
        std_nodes=float(np.std(counts)),
        vocab_size=vocab.size,
    )


def split_dataset(
    corpus: list[str], fractions=(0.8, 0.1, 0.1), seed: int = 0
) -> tuple[list[str], list[str], list[str]]:
    """Seeded shuffle, then contiguous slices; rounding leaves the
    remainder to the training split."""
    if not corpus:
        raise EmptyCorpus("cannot split an empty corpus")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    items = list(corpus)
    random.Random(seed).shuffle(items)
    n = len(items)
    n_val = int(n * fractions[1])
    n_te = int(n * fractions[2])
    n_tr = n - n_val - n_te
    return items[:n_tr], items[n_tr : n_tr + n_val], items[n_tr + n_val :]


def perplexity(model: DecoderLM, vocab: Vocabulary, corpus: list[str],
               batch_size: int = 16) -> float:
    """exp of the pooled per-token negative log likelihood.  BOS is never a
    target; EOS is.  Over-length sequences are skipped with a warning."""
    if not corpus:
        raise EmptyCorpus("cannot evaluate an empty corpus")
    seqs, skipped = encode_corpus(corpus, vocab, model.cfg.context_length)
    if skipped:
        log.warning("perplexity: skipped %d over-length sequence(s)", skipped)
    if not seqs:
        raise EmptyCorpus("all sequences exceed the context length")
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for b in range(0, len(seqs), batch_size):
            t, n = token_nll_sum(pad_batch(seqs[b : b + batch_size]), model)
            total += float(t)
            count += n
    return math.exp(total / count)


@dataclass
class PerplexityReport:
    cells: dict = field(default_factory=dict)  # (model, dataset, split) -> PP

    def set(self, model: str, dataset: str, split: str, pp: float):
        self.cells[(model, dataset, split)] = pp

    def get(self, model: str, dataset: str, split: str) -> float:
        return self.cells[(model, dataset, split)]

    def to_json(self) -> str:
        doc = [
            {"model": m, "dataset": d, "split": s, "perplexity": pp}
            for (m, d, s), pp in sorted(self.cells.items())
        ]
        return json.dumps(doc, indent=2)

    def to_text(self) -> str:
        splits = ("tr", "val", "te")
        rows = sorted({(m, d) for (m, d, _) in self.cells})
        w = max((len(f"{m} / {d}") for m, d in rows), default=10) + 2
        lines = ["".join([" " * w] + [f"{'PP_' + s:>10}" for s in splits])]
        for m, d in rows:
            cells = [
                f"{self.cells[(m, d, s)]:>10.2f}" if (m, d, s) in self.cells else " " * 10
                for s in splits
            ]
            lines.append(f"{m + ' / ' + d:<{w}}" + "".join(cells))
        return "\n".join(lines)


def report(models: dict, datasets: dict) -> PerplexityReport:
    """models: name -> (DecoderLM, Vocabulary); datasets: name -> dict of
    split name -> corpus."""
    rep = PerplexityReport()
    for mname, (model, vocab) in models.items():
        for dname, splits in datasets.items():
            for sname, corpus in splits.items():
                rep.set(mname, dname, sname, perplexity(model, vocab, corpus))
    return rep
