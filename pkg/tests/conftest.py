import pytest

from flowcomplete import syngen, training
from flowcomplete.evaluation import split_dataset
from flowcomplete.model import ModelConfig, save_checkpoint
from flowcomplete.pipeline import CompletionEngine


@pytest.fixture(scope="session")
def tiny_corpus():
    return syngen.generate_dataset(syngen.GeneratorConfig(seed=11), 220)


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_corpus, tmp_path_factory):
    """A small but usable model for pipeline/CLI/service tests."""
    tr, va, _te = split_dataset(tiny_corpus, seed=0)
    cfg = ModelConfig(n_layers=2, n_heads=2, n_embd=64, context_length=256)
    tc = training.TrainConfig(batch_size=8, eval_interval_steps=20, patience=2,
                              max_epochs=4, seed=0)
    result = training.train(tr, va, cfg, tc)
    path = tmp_path_factory.mktemp("ckpt") / "tiny"
    save_checkpoint(path, result.model, result.vocab, metadata={"kind": "tiny"})
    return path


@pytest.fixture(scope="session")
def engine(tiny_checkpoint):
    return CompletionEngine.from_checkpoint(str(tiny_checkpoint))
