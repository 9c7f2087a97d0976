"""End-to-end completion pipeline: serialize an input graph if one is given,
tokenize and encode the prefix, decode continuations from the language
model, detokenize, and attempt to parse every candidate back into a graph."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import decoding, sfiles
from . import tokenizer as tok
from .graph import FlowsheetGraph, from_json, graph_to_dict
from .model import DecoderLM, checkpoint_hash, load_checkpoint
from .tokenizer import BOS, Vocabulary

CHECKPOINT_ENV_VAR = "FLOWCOMPLETE_CHECKPOINT"

# characters some published listings add for readability; they carry no
# structure and lenient mode drops them before tokenizing
PRESENTATION_CHARS = "@="


class NoModelLoaded(RuntimeError):
    pass


def strip_presentation(s: str) -> str:
    return "".join(c for c in s if c not in PRESENTATION_CHARS)


@dataclass
class CompletionRequest:
    sfiles_prefix: str = ""
    graph: dict | None = None  # serialized instead of the prefix when given
    strategy: str = "beam"
    beam_width: int = 5
    p: float = 0.9
    k: int = 10
    temperature: float = 1.0
    max_new_tokens: int = 128
    num_return: int = 3
    seed: int = 0
    lenient: bool = False
    return_graphs: bool = True


@dataclass
class Candidate:
    sfiles: str
    log_prob: float
    valid: bool
    graph: dict | None = None
    parse_error: str | None = None


@dataclass
class CompletionResponse:
    prefix: str
    candidates: list = field(default_factory=list)


class CompletionEngine:
    """Immutable model snapshot plus the complete() pipeline around it."""

    def __init__(self, model: DecoderLM, vocab: Vocabulary,
                 metadata: dict | None = None, checkpoint: str | None = None):
        model.eval()
        self.model = model
        self.vocab = vocab
        self.metadata = metadata or {}
        self.checkpoint_path = checkpoint
        self.checkpoint_hash = checkpoint_hash(checkpoint) if checkpoint else None
        self.lm = decoding.TorchLM(model)

    @classmethod
    def from_checkpoint(cls, path: str | None = None) -> "CompletionEngine":
        path = path or os.environ.get(CHECKPOINT_ENV_VAR)
        if not path:
            raise NoModelLoaded(
                f"no checkpoint path given and {CHECKPOINT_ENV_VAR} is not set"
            )
        if not os.path.isdir(path):
            raise NoModelLoaded(f"checkpoint directory not found: {path}")
        model, vocab, metadata = load_checkpoint(path)
        return cls(model, vocab, metadata, checkpoint=path)

    def _prefix_ids(self, req: CompletionRequest) -> tuple[str, list[int]]:
        prefix = req.sfiles_prefix
        if req.graph is not None:
            prefix = sfiles.serialize(from_json(req.graph), partial=True)
        elif req.lenient:
            prefix = strip_presentation(prefix)
        ids = [BOS] + tok.encode(prefix, self.vocab, strict=True)
        return prefix, ids

    def _decode(self, ids: list[int], cfg: decoding.DecodeConfig) -> list:
        if cfg.strategy == "greedy":
            return [decoding.greedy(self.lm, ids, cfg)]
        if cfg.strategy == "beam":
            return decoding.beam_search(self.lm, ids, cfg)
        sampler = (decoding.top_p_sample if cfg.strategy == "top_p"
                   else decoding.top_k_sample)
        rng = np.random.default_rng(cfg.seed)
        return [sampler(self.lm, ids, cfg, rng) for _ in range(cfg.num_return)]

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        prefix, ids = self._prefix_ids(req)
        cfg = decoding.DecodeConfig(
            strategy=req.strategy,
            beam_width=req.beam_width,
            p=req.p,
            k=req.k,
            temperature=req.temperature,
            max_new_tokens=req.max_new_tokens,
            num_return=req.num_return,
            seed=req.seed,
        )
        response = CompletionResponse(prefix=prefix)
        for comp in self._decode(ids, cfg):
            text = tok.decode(comp.ids, self.vocab)
            cand = Candidate(sfiles=text, log_prob=comp.log_prob, valid=False)
            try:
                g = sfiles.parse(text, mode="strict")
            except (sfiles.SfilesError, tok.TokenizeError) as exc:
                cand.parse_error = f"{type(exc).__name__}: {exc}"
            else:
                cand.valid = True
                if req.return_graphs:
                    cand.graph = graph_to_dict(g)
            response.candidates.append(cand)
        return response

    def model_info(self) -> dict:
        from dataclasses import asdict

        return {
            "model_config": asdict(self.model.cfg),
            "vocab_size": self.vocab.size,
            "checkpoint_hash": self.checkpoint_hash,
            "metadata": self.metadata,
        }
