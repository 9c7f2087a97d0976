"""Decoder-only causal language model.

GPT-2-style decoder stack: learned (or sinusoidal) positional encoding,
pre-layer-norm blocks of masked multi-head self-attention plus a GELU
feed-forward sub-layer, weight-tied output head.  Built on torch tensors
and autograd; the architecture itself (attention, blocks, head) is
implemented here rather than taken from a library.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .tokenizer import Vocabulary

CHECKPOINT_VERSION = 1


class ShapeMismatch(ValueError):
    pass


class SequenceTooLong(ValueError):
    pass


@dataclass
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    n_embd: int = 128
    d_ff: int | None = None  # defaults to 4 * n_embd
    context_length: int = 256
    vocab_size: int = 0
    positional: str = "learned"  # "learned" | "sinusoidal"
    dropout: float = 0.1

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.n_embd
        if self.n_embd % self.n_heads:
            raise ValueError("n_embd must be divisible by n_heads")
        if self.context_length < 2:
            raise ValueError("context_length must be >= 2")
        if self.positional not in ("learned", "sinusoidal"):
            raise ValueError(f"unknown positional mode {self.positional!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def d_k(self) -> int:
        return self.n_embd // self.n_heads


def paper_scale_config(vocab_size: int = 53) -> ModelConfig:
    """The full-scale GPT-2-small-shaped configuration."""
    return ModelConfig(
        n_layers=12,
        n_heads=12,
        n_embd=768,
        d_ff=3072,
        context_length=512,
        vocab_size=vocab_size,
    )


def param_count(cfg: ModelConfig) -> int:
    """Closed-form number of trainable parameters (tied output head)."""
    e, ff = cfg.n_embd, cfg.d_ff
    n = cfg.vocab_size * e  # token embedding (shared with head)
    if cfg.positional == "learned":
        n += cfg.context_length * e
    per_layer = (
        4 * (e * e + e)  # q, k, v, o projections with biases
        + (e * ff + ff) + (ff * e + e)  # feed-forward
        + 2 * 2 * e  # two layer norms
    )
    n += cfg.n_layers * per_layer
    n += 2 * e  # final layer norm
    return n


def attention(
    q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, causal: bool = False
) -> torch.Tensor:
    """Scaled dot-product attention: softmax(q k^T / sqrt(d_k)) v, with the
    upper triangle of the score matrix masked to -inf when causal."""
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"incompatible shapes {q.shape}, {k.shape}, {v.shape}")
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if causal:
        n, m = scores.shape[-2], scores.shape[-1]
        mask = torch.triu(torch.ones(n, m, dtype=torch.bool, device=scores.device), 1)
        scores = scores.masked_fill(mask, float("-inf"))
    return torch.softmax(scores, dim=-1) @ v


def sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    idx = torch.arange(0, dim, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, idx / dim)
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle[:, : dim // 2])
    return table.float()


class SelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_k = cfg.d_k
        self.wq = nn.Linear(cfg.n_embd, cfg.n_embd)
        self.wk = nn.Linear(cfg.n_embd, cfg.n_embd)
        self.wv = nn.Linear(cfg.n_embd, cfg.n_embd)
        self.wo = nn.Linear(cfg.n_embd, cfg.n_embd)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, e = x.shape

        def heads(w):
            return w(x).view(b, t, self.n_heads, self.d_k).transpose(1, 2)

        out = attention(heads(self.wq), heads(self.wk), heads(self.wv), causal=True)
        out = out.transpose(1, 2).reshape(b, t, e)
        return self.drop(self.wo(out))


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.n_embd)
        self.attn = SelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.n_embd)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.n_embd, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.n_embd),
            nn.Dropout(cfg.dropout),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class DecoderLM(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.vocab_size < 5:
            raise ValueError("vocab_size must cover the special tokens")
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.n_embd)
        if cfg.positional == "learned":
            self.pos_emb = nn.Embedding(cfg.context_length, cfg.n_embd)
        else:
            self.register_buffer(
                "pos_table", sinusoidal_table(cfg.context_length, cfg.n_embd)
            )
        self.drop = nn.Dropout(cfg.dropout)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.n_embd)
        self.head = nn.Linear(cfg.n_embd, cfg.vocab_size, bias=False)
        self.head.weight = self.tok_emb.weight  # tied
        self.apply(self._init)

    @staticmethod
    def _init(module):
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
        t = ids.shape[1]
        if t > self.cfg.context_length:
            raise SequenceTooLong(f"sequence of {t} tokens exceeds context "
                                  f"length {self.cfg.context_length}")
        x = self.tok_emb(ids)
        if self.cfg.positional == "learned":
            x = x + self.pos_emb(torch.arange(t, device=ids.device))[None]
        else:
            x = x + self.pos_table[:t][None]
        x = self.drop(x)
        for blk in self.blocks:
            x = blk(x)
        return self.head(self.ln_f(x))


# ---------------------------------------------------------------------------
# checkpoints: JSON manifest + little-endian float32 blob
# ---------------------------------------------------------------------------


def save_checkpoint(
    path,
    model: DecoderLM,
    vocab: Vocabulary,
    metadata: dict | None = None,
) -> None:
    os.makedirs(path, exist_ok=True)
    tensors = []
    offset = 0
    blobs = []
    for name, p in model.state_dict().items():
        arr = p.detach().cpu().numpy().astype("<f4")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes(order="C"))
        offset += arr.nbytes
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": asdict(model.cfg),
        "vocabulary": list(vocab.id_to_token),
        "metadata": metadata or {},
        "tensors": tensors,
        "blob_bytes": offset,
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f)
    with open(os.path.join(path, "weights.bin"), "wb") as f:
        for b in blobs:
            f.write(b)


def load_checkpoint(path) -> tuple[DecoderLM, Vocabulary, dict]:
    with open(os.path.join(path, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint format version")
    with open(os.path.join(path, "weights.bin"), "rb") as f:
        blob = f.read()
    if len(blob) != manifest["blob_bytes"]:
        raise ShapeMismatch(
            f"blob is {len(blob)} bytes, manifest declares {manifest['blob_bytes']}"
        )
    cfg = ModelConfig(**manifest["model_config"])
    model = DecoderLM(cfg)
    state = {}
    for spec in manifest["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=spec["offset"])
        state[spec["name"]] = torch.from_numpy(arr.copy().reshape(shape))
    model.load_state_dict(state)
    vocab = Vocabulary.from_tokens(manifest["vocabulary"])
    if vocab.size != cfg.vocab_size:
        raise ShapeMismatch("vocabulary size does not match model config")
    return model, vocab, manifest["metadata"]


def checkpoint_hash(path) -> str:
    h = hashlib.sha256()
    for name in ("manifest.json", "weights.bin"):
        with open(os.path.join(path, name), "rb") as f:
            h.update(f.read())
    return h.hexdigest()[:16]
