import json
import math

import pytest
import torch

from flowcomplete import evaluation, training
from flowcomplete import tokenizer as tok
from flowcomplete.evaluation import (
    EmptyCorpus,
    PerplexityReport,
    dataset_stats,
    perplexity,
    report,
    split_dataset,
)
from flowcomplete.model import DecoderLM, ModelConfig

CORPUS = [
    "(raw)(hex)(prod)",
    "(raw)(r)(prod)",
    "(raw)(hex)(r)(prod)",
    "(raw)(hex)(hex)(prod)",
    "(raw)(r)(hex)(prod)",
    "(raw)(prod)",
]


def tiny_model(vocab, **over):
    base = dict(n_layers=1, n_heads=2, n_embd=16, context_length=32,
                vocab_size=vocab.size, dropout=0.0)
    base.update(over)
    return DecoderLM(ModelConfig(**base))


class TestSplit:
    def test_sizes_floor_val_and_test(self):
        tr, va, te = split_dataset(list(range(10)), seed=0)
        assert (len(tr), len(va), len(te)) == (8, 1, 1)
        tr, va, te = split_dataset(list(range(7953)), seed=0)
        assert (len(tr), len(va), len(te)) == (6363, 795, 795)

    def test_partition_and_determinism(self):
        items = [f"s{i}" for i in range(57)]
        a = split_dataset(items, seed=5)
        b = split_dataset(items, seed=5)
        assert a == b
        assert sorted(a[0] + a[1] + a[2]) == sorted(items)
        assert split_dataset(items, seed=6) != a

    def test_empty_and_bad_fractions(self):
        with pytest.raises(EmptyCorpus):
            split_dataset([])
        with pytest.raises(ValueError):
            split_dataset(["a"], fractions=(0.5, 0.2, 0.2))


class TestStats:
    def test_counts_units_only(self):
        st = dataset_stats(["(raw)(mix)<1(r)(splt)1(prod)"])
        assert st.mean_nodes == 5  # recycle digits and tags are not nodes
        assert st.samples_tr == 1 and st.samples_val == 0

    def test_vocab_covers_all_splits(self):
        st = dataset_stats(CORPUS[:2], CORPUS[2:4], CORPUS[4:])
        assert st.vocab_size == tok.build_vocab(CORPUS).size
        assert (st.samples_tr, st.samples_val, st.samples_te) == (2, 2, 2)

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            dataset_stats([])


class TestPerplexity:
    def test_uniform_model_equals_vocab_size(self):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab).double()
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
        pp = perplexity(model, vocab, CORPUS)
        assert pp == pytest.approx(vocab.size, rel=1e-6)

    def test_equals_exp_of_mean_loss(self):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab).double()
        model.eval()
        seqs, _ = training.encode_corpus(CORPUS, vocab, 32)
        with torch.no_grad():
            loss = float(training.loss(training.pad_batch(seqs), model))
        assert perplexity(model, vocab, CORPUS) == pytest.approx(
            math.exp(loss), rel=1e-6)

    def test_batch_size_does_not_change_pooled_value(self):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab).double()
        a = perplexity(model, vocab, CORPUS, batch_size=2)
        b = perplexity(model, vocab, CORPUS, batch_size=16)
        assert a == pytest.approx(b, rel=1e-9)

    def test_over_length_skipped(self, caplog):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab, context_length=5).double()
        with caplog.at_level("WARNING"):
            pp = perplexity(model, vocab, CORPUS)
        assert pp > 0
        assert any("skipped" in r.message for r in caplog.records)

    def test_empty_corpus(self):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab)
        with pytest.raises(EmptyCorpus):
            perplexity(model, vocab, [])


class TestReport:
    def test_grid_text_and_json(self):
        vocab = tok.build_vocab(CORPUS)
        model = tiny_model(vocab).double()
        rep = report(
            {"m": (model, vocab)},
            {"synthetic": {"tr": CORPUS[:4], "val": CORPUS[4:5], "te": CORPUS[5:]}},
        )
        text = rep.to_text()
        assert "PP_tr" in text and "m / synthetic" in text
        doc = json.loads(rep.to_json())
        assert len(doc) == 3
        assert {d["split"] for d in doc} == {"tr", "val", "te"}
        assert rep.get("m", "synthetic", "te") == pytest.approx(
            perplexity(model, vocab, CORPUS[5:]))
