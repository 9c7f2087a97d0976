"""Training loop for the decoder language model: batching, cross-entropy
loss, Adam updates, periodic validation with early stopping, fine-tuning."""

from __future__ import annotations

import copy
import logging
import random
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from . import tokenizer as tok
from .model import DecoderLM, ModelConfig, SequenceTooLong
from .tokenizer import PAD, Vocabulary

log = logging.getLogger(__name__)


class EmptyBatch(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


class VocabMismatch(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 8
    eval_interval_steps: int = 200
    patience: int = 3
    max_epochs: int = 50
    learning_rate: float = 3e-4
    seed: int = 0
    precision: int = 32  # 32 or 64

    def __post_init__(self):
        for name in ("batch_size", "eval_interval_steps", "max_epochs", "learning_rate"):
            if getattr(self, name) <= 0 and not (name == "max_epochs" and self.max_epochs == 0):
                raise ValueError(f"{name} must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")


@dataclass
class TrainResult:
    model: DecoderLM
    vocab: Vocabulary
    curves: list = field(default_factory=list)  # (step, train_loss, val_loss)
    best_val_loss: float = float("inf")
    steps: int = 0
    skipped_over_length: int = 0


def encode_corpus(corpus: list[str], vocab: Vocabulary, context_length: int):
    """BOS + tokens + EOS per line; over-length sequences are skipped."""
    seqs, skipped = [], 0
    for line in corpus:
        ids = tok.encode(line, vocab, add_bos=True, add_eos=True)
        if len(ids) > context_length:
            skipped += 1
            continue
        seqs.append(ids)
    if skipped:
        log.warning("skipped %d over-length sequence(s)", skipped)
    return seqs, skipped


def pad_batch(seqs: list[list[int]], device=None) -> torch.Tensor:
    if not seqs:
        raise EmptyBatch("batch contains no sequences")
    width = max(len(s) for s in seqs)
    out = torch.full((len(seqs), width), PAD, dtype=torch.long, device=device)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
    return out


def loss(batch: torch.Tensor, model: DecoderLM) -> torch.Tensor:
    """Mean next-token cross entropy over non-PAD targets."""
    if batch.numel() == 0:
        raise EmptyBatch("empty batch")
    logits = model(batch)
    targets = batch[:, 1:]
    if (targets != PAD).sum() == 0:
        raise EmptyBatch("batch has no non-PAD targets")
    return F.cross_entropy(
        logits[:, :-1].reshape(-1, logits.shape[-1]),
        targets.reshape(-1),
        ignore_index=PAD,
    )


def token_nll_sum(batch: torch.Tensor, model: DecoderLM) -> tuple[torch.Tensor, int]:
    """Summed next-token negative log likelihood and target-token count."""
    logits = model(batch)
    targets = batch[:, 1:]
    n = int((targets != PAD).sum())
    total = F.cross_entropy(
        logits[:, :-1].reshape(-1, logits.shape[-1]),
        targets.reshape(-1),
        ignore_index=PAD,
        reduction="sum",
    )
    return total, n


def gradients(batch: torch.Tensor, model: DecoderLM) -> dict:
    """Exact gradient of the batch loss for every parameter tensor."""
    model.zero_grad(set_to_none=True)
    loss(batch, model).backward()
    out = {}
    for name, p in model.named_parameters():
        out[name] = (
            p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        )
    model.zero_grad(set_to_none=True)
    return out


def _batches(seqs, order, batch_size):
    # bucket by length within the shuffled order to limit padding
    chunk = batch_size * 16
    for start in range(0, len(order), chunk):
        idx = sorted(order[start : start + chunk], key=lambda i: len(seqs[i]))
        for b in range(0, len(idx), batch_size):
            yield [seqs[i] for i in idx[b : b + batch_size]]


@torch.no_grad()
def _mean_loss(seqs, model, batch_size) -> float:
    model.eval()
    total, count = 0.0, 0
    for b in range(0, len(seqs), batch_size):
        t, n = token_nll_sum(pad_batch(seqs[b : b + batch_size]), model)
        total += float(t)
        count += n
    model.train()
    return total / max(count, 1)


def _fit(model: DecoderLM, vocab, train_seqs, val_seqs, cfg: TrainConfig) -> TrainResult:
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    if cfg.precision == 64:
        model.double()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                           betas=(0.9, 0.999), eps=1e-8)
    result = TrainResult(model=model, vocab=vocab)
    best_state = copy.deepcopy(model.state_dict())
    result.best_val_loss = _mean_loss(val_seqs, model, cfg.batch_size)
    bad_evals = 0
    step = 0
    recent_train: list[float] = []
    model.train()
    stop = False
    for _ in range(cfg.max_epochs):
        order = list(range(len(train_seqs)))
        rng.shuffle(order)
        for batch_seqs in _batches(train_seqs, order, cfg.batch_size):
            opt.zero_grad(set_to_none=True)
            batch_loss = loss(pad_batch(batch_seqs), model)
            if not torch.isfinite(batch_loss):
                raise NonFiniteLoss(f"loss became non-finite at step {step}")
            batch_loss.backward()
            opt.step()
            recent_train.append(float(batch_loss.detach()))
            step += 1
            if step % cfg.eval_interval_steps == 0:
                val = _mean_loss(val_seqs, model, cfg.batch_size)
                train_avg = sum(recent_train) / len(recent_train)
                recent_train = []
                result.curves.append((step, train_avg, val))
                if val < result.best_val_loss - 1e-6:
                    result.best_val_loss = val
                    best_state = copy.deepcopy(model.state_dict())
                    bad_evals = 0
                else:
                    bad_evals += 1
                    if bad_evals >= max(cfg.patience, 1):
                        stop = True
                        break
        if stop:
            break
    model.load_state_dict(best_state)
    model.eval()
    result.steps = step
    return result


def train(
    train_corpus: list[str],
    val_corpus: list[str],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    vocab: Vocabulary | None = None,
) -> TrainResult:
    if vocab is None:
        vocab = tok.build_vocab(train_corpus)
    model_cfg.vocab_size = vocab.size
    torch.manual_seed(train_cfg.seed)
    model = DecoderLM(model_cfg)
    train_seqs, sk1 = encode_corpus(train_corpus, vocab, model_cfg.context_length)
    val_seqs, sk2 = encode_corpus(val_corpus, vocab, model_cfg.context_length)
    if not train_seqs or not val_seqs:
        raise EmptyBatch("empty training or validation corpus")
    result = _fit(model, vocab, train_seqs, val_seqs, train_cfg)
    result.skipped_over_length = sk1 + sk2
    return result


def corpus_oov_tokens(corpus: list[str], vocab: Vocabulary) -> set:
    oov = set()
    for line in corpus:
        oov.update(t.text for t in tok.tokenize(line) if t.text not in vocab.token_to_id)
    return oov


def extend_vocabulary(model: DecoderLM, vocab: Vocabulary, new_tokens: list[str]):
    """Append vocabulary rows with fresh init; returns (model, vocab)."""
    new_vocab = Vocabulary.from_tokens(list(vocab.id_to_token) + sorted(new_tokens))
    cfg = copy.copy(model.cfg)
    cfg.vocab_size = new_vocab.size
    torch.manual_seed(0)
    grown = DecoderLM(cfg)
    state = grown.state_dict()
    old = model.state_dict()
    for name, p in old.items():
        if name in ("tok_emb.weight", "head.weight"):
            state[name][: p.shape[0]] = p
        else:
            state[name] = p
    grown.load_state_dict(state)
    return grown, new_vocab


def finetune(
    model: DecoderLM,
    vocab: Vocabulary,
    train_corpus: list[str],
    val_corpus: list[str],
    train_cfg: TrainConfig,
    extend_vocab: bool = False,
) -> TrainResult:
    """Continue training from existing weights on a new corpus."""
    oov = corpus_oov_tokens(train_corpus + val_corpus, vocab)
    if oov:
        if not extend_vocab:
            raise VocabMismatch(
                "corpus tokens missing from checkpoint vocabulary: "
                + ", ".join(sorted(oov))
            )
        model, vocab = extend_vocabulary(model, vocab, sorted(oov))
    model = copy.deepcopy(model)
    train_seqs, sk1 = encode_corpus(train_corpus, vocab, model.cfg.context_length)
    val_seqs, sk2 = encode_corpus(val_corpus, vocab, model.cfg.context_length)
    if not train_seqs or not val_seqs:
        raise EmptyBatch("empty fine-tuning corpus")
    result = _fit(model, vocab, train_seqs, val_seqs, train_cfg)
    result.skipped_over_length = sk1 + sk2
    return result


def curves_to_csv(curves: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("step,train_loss,val_loss\n")
        for step, tr, val in curves:
            f.write(f"{step},{tr},{val}\n")
