"""Acceptance gate: one test per release criterion.

The two training-based criteria use the shared desk-scale checkpoints from
_desk (built once, cached under .cache/), so the first run trains for
several minutes and later runs are fast.
"""

import math
import re

import numpy as np
import pytest
import torch

import _desk
from flowcomplete import decoding, sfiles, syngen, training
from flowcomplete import tokenizer as tok
from flowcomplete.evaluation import perplexity
from flowcomplete.graph import from_json, isomorphic, validate
from flowcomplete.model import (
    DecoderLM,
    ModelConfig,
    load_checkpoint,
    param_count,
    paper_scale_config,
)
from flowcomplete.pipeline import CompletionEngine, CompletionRequest


@pytest.fixture(scope="module")
def desk():
    """Pre-trained desk-scale model with its corpus splits."""
    model, vocab, meta = load_checkpoint(_desk.desk_checkpoint())
    tr, va, te = _desk.desk_corpus()
    return {"model": model, "vocab": vocab, "meta": meta,
            "train": tr, "val": va, "test": te}


@pytest.fixture(scope="module")
def desk_engine():
    return CompletionEngine.from_checkpoint(str(_desk.desk_checkpoint()))


def test_01_tokenizer_fidelity():
    s = "(raw)(hex)(r)(mix)<1(v)(dist)[{tout}(prod)]{bout}(splt)1(prod)"
    expected = ["(raw)", "(hex)", "(r)", "(mix)", "<1", "(v)", "(dist)", "[",
                "{tout}", "(prod)", "]", "{bout}", "(splt)", "1", "(prod)"]
    got = [t.text for t in tok.tokenize(s)]
    assert got == expected, f"tokenizer fidelity: {got}"


def test_02_regex_oracle_equivalence(desk):
    oracle = re.compile(tok.TOKEN_PATTERN)
    strings = list(desk["train"]) + list(desk["val"]) + list(desk["test"])
    strings += _desk.shifted_corpus()[0]
    rng = np.random.default_rng(0)
    alphabet = list("()/{}[]<>%&|n0123456789rawhexprodmixsplt")
    while len(strings) < 10_000:
        n = int(rng.integers(1, 60))
        strings.append("".join(rng.choice(alphabet, size=n)))
    assert len(strings) >= 10_000
    disagreements = sum(
        1 for s in strings[:10_000]
        if [t.text for t in tok.tokenize(s, strict=False)] != oracle.findall(s)
    )
    assert disagreements == 0, f"{disagreements} scanner/regex disagreements"


def test_03_codec_round_trip(desk):
    fixture = ("(raw)(hex){1}(r)<&|(raw)(pp)&|(mix)<1(v)(dist)[{tout}(prod)]"
               "{bout}(splt)1(prod)n|(raw)(hex){1}(prod)")
    g = sfiles.parse(fixture)
    assert sfiles.serialize(g) == fixture
    assert isomorphic(sfiles.parse(sfiles.serialize(g)), g)
    failures = 0
    for s in desk["train"][:1000]:
        graph = sfiles.parse(s)
        if validate(graph) or not isomorphic(sfiles.parse(sfiles.serialize(graph)), graph):
            failures += 1
    assert failures == 0, f"{failures}/1000 round-trip failures"


def test_04_parameter_count():
    n = param_count(paper_scale_config(vocab_size=53))
    rel = abs(n - 85.9e6) / 85.9e6
    assert rel < 0.02, f"param count {n} deviates {rel:.3%} from 85.9M"


def test_05_gradient_correctness():
    torch.manual_seed(0)
    cfg = ModelConfig(n_layers=1, n_heads=2, n_embd=8, context_length=16,
                      vocab_size=9, dropout=0.0)
    model = DecoderLM(cfg).double()
    model.eval()
    batch = torch.tensor([[1, 4, 5, 6, 2], [1, 7, 8, 2, 0]])
    analytic = training.gradients(batch, model)
    h = 1e-5
    worst = 0.0
    rng = np.random.default_rng(1)
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        for j in rng.choice(flat.numel(), size=min(8, flat.numel()), replace=False):
            orig = flat[j].item()
            flat[j] = orig + h
            up = float(training.loss(batch, model).detach())
            flat[j] = orig - h
            down = float(training.loss(batch, model).detach())
            flat[j] = orig
            fd = (up - down) / (2 * h)
            an = analytic[name].view(-1)[j].item()
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-8))
    assert worst < 1e-4, f"max relative gradient error {worst:.2e}"


def test_06_decoding_oracles():
    from test_decoding import RandomLM, TableLM, enumerate_sequences

    # greedy 0.30 vs beam 0.36 separation
    lm = TableLM(
        {(): [0.6, 0.4, 0.0, 0.0, 0.0],
         (0,): [0.0, 0.0, 0.5, 0.5, 0.0],
         (1,): [0.0, 0.0, 0.9, 0.1, 0.0]},
        vocab_size=5, eos_id=4)
    g = decoding.greedy(lm, [9], decoding.DecodeConfig(strategy="greedy",
                                                       max_new_tokens=5))
    b = decoding.beam_search(lm, [9], decoding.DecodeConfig(
        strategy="beam", beam_width=2, num_return=1, max_new_tokens=5))[0]
    assert math.exp(g.log_prob) == pytest.approx(0.30)
    assert math.exp(b.log_prob) == pytest.approx(0.36)

    # wide beam equals exhaustive argmax on random toy models
    for seed in range(5):
        lm = RandomLM(seed, 4, eos_id=3)
        best = decoding.beam_search(lm, [9], decoding.DecodeConfig(
            strategy="beam", beam_width=4 ** 5, num_return=1,
            max_new_tokens=5))[0]
        oracle = max(enumerate_sequences(lm, [9], 5), key=lambda r: r[1])
        assert best.log_prob == pytest.approx(oracle[1], abs=1e-9)

    # nucleus minimality on 1,000 random distributions
    rng = np.random.default_rng(0)
    for _ in range(1000):
        probs = rng.dirichlet(np.ones(int(rng.integers(2, 10))))
        p = float(rng.uniform(0.05, 1.0))
        chosen = decoding.nucleus_set(probs, p)
        mass = probs[chosen].sum()
        assert mass >= p - 1e-9
        if len(chosen) > 1:
            assert mass - probs[chosen[-1]] < p


def test_07_perplexity_identities():
    corpus = ["(raw)(hex)(prod)", "(raw)(r)(prod)", "(raw)(hex)(r)(prod)"]
    vocab = tok.build_vocab(corpus)
    model = DecoderLM(ModelConfig(n_layers=1, n_heads=2, n_embd=16,
                                  context_length=32, vocab_size=vocab.size,
                                  dropout=0.0)).double()
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    pp = perplexity(model, vocab, corpus)
    assert pp == pytest.approx(vocab.size, rel=1e-6), "uniform PP != |V|"

    torch.manual_seed(0)
    model2 = DecoderLM(ModelConfig(n_layers=1, n_heads=2, n_embd=16,
                                   context_length=32, vocab_size=vocab.size,
                                   dropout=0.0)).double()
    model2.eval()
    seqs, _ = training.encode_corpus(corpus, vocab, 32)
    with torch.no_grad():
        loss = float(training.loss(training.pad_batch(seqs), model2))
    assert perplexity(model2, vocab, corpus) == pytest.approx(
        math.exp(loss), rel=1e-6), "PP != exp(loss)"


def test_08_desk_scale_training(desk):
    vocab = desk["vocab"]
    pp_test = perplexity(desk["model"], vocab, desk["test"])
    baseline = vocab.size  # uniform model
    assert pp_test <= 6.0, f"desk test PP {pp_test:.2f} > 6"
    assert baseline > 40, f"uniform baseline {baseline} unexpectedly small"
    pp_train = perplexity(desk["model"], vocab, desk["train"][:500])
    pp_val = perplexity(desk["model"], vocab, desk["val"])
    assert pp_val / pp_train < 1.3, (
        f"train/val gap too large: {pp_train:.2f} vs {pp_val:.2f}")


def test_09_finetuning_pattern(desk):
    _tr, _va, shifted_test = _desk.shifted_corpus()
    pp_pre = perplexity(desk["model"], desk["vocab"], shifted_test)
    tuned, tuned_vocab, _meta = load_checkpoint(_desk.finetuned_checkpoint())
    pp_post = perplexity(tuned, tuned_vocab, shifted_test)
    assert pp_pre >= 3.0 * pp_post, (
        f"fine-tune ratio {pp_pre / pp_post:.2f} < 3 "
        f"(pre {pp_pre:.2f}, post {pp_post:.2f})")


def _prefix_sample(corpus, n, rng):
    prefixes = []
    for s in rng.choice(len(corpus), size=n, replace=False):
        tokens = [t.text for t in tok.tokenize(corpus[int(s)])]
        k = int(rng.integers(2, 7))
        prefixes.append("".join(tokens[:k]))
    return prefixes


def _validity_rate(engine, prefixes, strategy, **kw):
    valid = total = 0
    for p in prefixes:
        req = CompletionRequest(sfiles_prefix=p, strategy=strategy,
                                num_return=3, max_new_tokens=150, **kw)
        for c in engine.complete(req).candidates:
            total += 1
            valid += c.valid
    return valid / total


def test_10_completion_validity(desk, desk_engine):
    rng = np.random.default_rng(3)
    prefixes = _prefix_sample(desk["test"], 50, rng)

    beam_rate = _validity_rate(desk_engine, prefixes, "beam", beam_width=5)
    assert beam_rate >= 0.90, f"beam validity {beam_rate:.2%} < 90%"

    topp_rate = _validity_rate(desk_engine, prefixes, "top_p", p=0.9, seed=0)
    assert topp_rate >= 0.60, f"top-p validity {topp_rate:.2%} < 60%"

    # recycle-and-absorber structural check
    req = CompletionRequest(sfiles_prefix="(raw)(mix)<1(r){bin}(abs)",
                            strategy="beam", beam_width=5, num_return=5,
                            max_new_tokens=150)
    ok = False
    for c in desk_engine.complete(req).candidates:
        if not c.valid:
            continue
        g = from_json(c.graph)
        closes_recycle = any(e.dst == "mix-0" and e.src != "raw-0"
                             for e in g.edges)
        absorber_ok = (len(g.in_edges("abs-0")) >= 2
                       and len(g.out_edges("abs-0")) >= 2)
        if closes_recycle and absorber_ok:
            ok = True
            break
    assert ok, "no beam completion closed the recycle and finished the absorber"
