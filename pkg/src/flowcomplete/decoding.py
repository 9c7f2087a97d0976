"""Autoregressive decoding: greedy, beam search, top-k and top-p (nucleus)
sampling over any model exposing next-token logits.

A model is any object with
    next_token_logits(ids: list[int]) -> 1-D numpy array over the vocabulary
    context_length: int
    eos_id: int
Sequence scores are plain sums of next-token log probabilities (no length
normalization by default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SequenceTooLong


@dataclass
class DecodeConfig:
    strategy: str = "beam"  # greedy | beam | top_k | top_p
    beam_width: int = 5
    p: float = 0.9
    k: int = 10
    temperature: float = 1.0
    max_new_tokens: int = 128
    num_return: int = 3
    seed: int = 0
    length_normalize: bool = False

    def __post_init__(self):
        if self.strategy not in ("greedy", "beam", "top_k", "top_p"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.beam_width < 1 or self.k < 1 or self.max_new_tokens < 1:
            raise ValueError("beam_width, k and max_new_tokens must be >= 1")
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.strategy == "beam" and self.num_return > self.beam_width:
            raise ValueError("num_return cannot exceed beam_width")


@dataclass
class Completion:
    ids: list[int]
    log_prob: float
    finished: bool


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    x = logits - logits.max()
    return x - np.log(np.exp(x).sum())


def _next_log_probs(model, context: list[int], temperature: float) -> np.ndarray:
    if len(context) >= model.context_length:
        raise SequenceTooLong(
            f"context of {len(context)} tokens leaves no room to generate "
            f"(context_length {model.context_length})"
        )
    logits = np.asarray(model.next_token_logits(list(context)), dtype=float)
    return _log_softmax(logits / temperature)


def next_distribution(model, context: list[int], temperature: float = 1.0) -> np.ndarray:
    """Probability vector for the next token."""
    return np.exp(_next_log_probs(model, context, temperature))


def sequence_log_prob(model, seq: list[int]) -> float:
    """Sum of log P(t_i | t_1..t_{i-1}) over the whole sequence after its
    first token."""
    if len(seq) < 2:
        raise ValueError("sequence must have at least 2 tokens")
    total = 0.0
    for i in range(1, len(seq)):
        total += _next_log_probs(model, seq[:i], 1.0)[seq[i]]
    return float(total)


def greedy(model, context: list[int], cfg: DecodeConfig) -> Completion:
    ids = list(context)
    log_prob = 0.0
    finished = False
    for _ in range(cfg.max_new_tokens):
        lp = _next_log_probs(model, ids, cfg.temperature)
        t = int(lp.argmax())  # ties resolve to the lowest id
        ids.append(t)
        log_prob += float(lp[t])
        if t == model.eos_id:
            finished = True
            break
    return Completion(ids, log_prob, finished)


def beam_search(model, context: list[int], cfg: DecodeConfig) -> list[Completion]:
    """Breadth-limited search keeping the beam_width most probable partial
    sequences; hypotheses that emit EOS retire into the result pool."""
    alive = [(0.0, list(context))]
    pool: list[Completion] = []
    for _ in range(cfg.max_new_tokens):
        if not alive:
            break
        candidates = []
        for h, (lp, ids) in enumerate(alive):
            step = _next_log_probs(model, ids, cfg.temperature)
            for t, tlp in enumerate(step):
                candidates.append((lp + float(tlp), h, t))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_alive = []
        for score, h, t in candidates[: cfg.beam_width]:
            ids = alive[h][1] + [t]
            if t == model.eos_id:
                pool.append(Completion(ids, score, True))
            else:
                next_alive.append((score, ids))
        alive = next_alive
    pool.extend(Completion(ids, lp, False) for lp, ids in alive)

    def rank(c: Completion) -> float:
        if cfg.length_normalize:
            return -c.log_prob / max(len(c.ids) - len(context), 1)
        return -c.log_prob

    pool.sort(key=rank)
    return pool[: cfg.num_return]


def nucleus_set(probs: np.ndarray, p: float) -> np.ndarray:
    """Token ids of the smallest probability-sorted prefix with cumulative
    mass >= p; boundary ties include the lowest id first."""
    order = np.lexsort((np.arange(len(probs)), -probs))
    cum = np.cumsum(probs[order])
    cutoff = int(np.searchsorted(cum, p - 1e-12)) + 1
    return order[: min(cutoff, len(probs))]


def _sample_step(model, ids, cfg: DecodeConfig, rng, restrict) -> tuple[int, float]:
    lp = _next_log_probs(model, ids, cfg.temperature)
    probs = np.exp(lp)
    keep = restrict(probs)
    sub = probs[keep]
    sub = sub / sub.sum()
    t = int(keep[rng.choice(len(keep), p=sub)])
    return t, float(lp[t])


def _sampled(model, context, cfg: DecodeConfig, rng, restrict) -> Completion:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    ids = list(context)
    log_prob = 0.0
    finished = False
    for _ in range(cfg.max_new_tokens):
        t, tlp = _sample_step(model, ids, cfg, rng, restrict)
        ids.append(t)
        log_prob += tlp
        if t == model.eos_id:
            finished = True
            break
    return Completion(ids, log_prob, finished)


def top_p_sample(model, context: list[int], cfg: DecodeConfig, rng=None) -> Completion:
    return _sampled(model, context, cfg, rng, lambda probs: nucleus_set(probs, cfg.p))


def top_k_sample(model, context: list[int], cfg: DecodeConfig, rng=None) -> Completion:
    def restrict(probs):
        order = np.lexsort((np.arange(len(probs)), -probs))
        return order[: cfg.k]

    return _sampled(model, context, cfg, rng, restrict)


@dataclass
class TorchLM:
    """Adapter exposing a trained DecoderLM to the decoding functions."""

    model: "object"
    eos_id: int = 2

    @property
    def context_length(self) -> int:
        return self.model.cfg.context_length

    def next_token_logits(self, ids: list[int]) -> np.ndarray:
        import torch

        with torch.no_grad():
            logits = self.model(torch.tensor([ids], dtype=torch.long))
        return logits[0, -1].double().numpy()
