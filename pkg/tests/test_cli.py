import json

import pytest

from flowcomplete import tokenizer as tok
from flowcomplete.cli import main
from flowcomplete.evaluation import split_dataset
from flowcomplete.model import load_checkpoint


class TestCorpusCommands:
    def test_generate_stats_split(self, tmp_path, capsys):
        corpus_path = tmp_path / "c.sfiles"
        assert main(["generate", "--n", "25", "--seed", "3",
                     "--out", str(corpus_path)]) == 0
        corpus = tok.read_corpus(corpus_path)
        assert len(corpus) == len(set(corpus)) == 25

        assert main(["stats", "--train", str(corpus_path)]) == 0
        out = capsys.readouterr().out
        doc = json.loads(out[out.index("{"):])
        assert doc["samples_tr"] == 25

        assert main(["split", "--corpus", str(corpus_path), "--seed", "1",
                     "--train-out", str(tmp_path / "tr"),
                     "--val-out", str(tmp_path / "va"),
                     "--test-out", str(tmp_path / "te")]) == 0
        tr = tok.read_corpus(tmp_path / "tr")
        va = tok.read_corpus(tmp_path / "va")
        te = tok.read_corpus(tmp_path / "te")
        assert (tr, va, te) == split_dataset(corpus, seed=1)

    def test_generate_with_config_file(self, tmp_path):
        from flowcomplete.syngen import GeneratorConfig

        GeneratorConfig(seed=0).to_file(tmp_path / "gen.json")
        assert main(["generate", "--n", "5", "--seed", "2",
                     "--config", str(tmp_path / "gen.json"),
                     "--out", str(tmp_path / "c.sfiles")]) == 0
        assert len(tok.read_corpus(tmp_path / "c.sfiles")) == 5

    def test_missing_corpus_file_is_io_error(self, tmp_path, capsys):
        rc = main(["stats", "--train", str(tmp_path / "absent.sfiles")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestParseSerialize:
    def test_parse_prints_graph_json(self, capsys):
        assert main(["parse", "(raw)(prod)"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert [n["category"] for n in doc["nodes"]] == ["raw", "prod"]

    def test_parse_validation_error_exit_2(self, capsys):
        assert main(["parse", "(("]) == 2
        assert "stray character" in capsys.readouterr().err

    def test_serialize_roundtrip(self, tmp_path, capsys):
        main(["parse", "(raw)(hex)(prod)"])
        graph_json = capsys.readouterr().out
        (tmp_path / "g.json").write_text(graph_json)
        assert main(["serialize", str(tmp_path / "g.json")]) == 0
        assert capsys.readouterr().out.strip() == "(raw)(hex)(prod)"

    def test_serialize_schema_error_exit_2(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text('{"nodes": []}')
        assert main(["serialize", str(tmp_path / "bad.json")]) == 2


class TestModelCommands:
    def test_train_eval_complete(self, tmp_path, tiny_corpus, capsys):
        tr, va, _ = split_dataset(tiny_corpus[:60], seed=0)
        tok.write_corpus(tmp_path / "tr", tr)
        tok.write_corpus(tmp_path / "va", va)
        rc = main(["train", "--train", str(tmp_path / "tr"),
                   "--val", str(tmp_path / "va"),
                   "--out", str(tmp_path / "ck"),
                   "--layers", "1", "--heads", "2", "--embd", "32",
                   "--max-epochs", "1", "--eval-interval", "5",
                   "--curves", str(tmp_path / "curves.csv")])
        assert rc == 0
        model, vocab, meta = load_checkpoint(tmp_path / "ck")
        assert model.cfg.n_layers == 1
        assert (tmp_path / "curves.csv").read_text().startswith("step,")
        capsys.readouterr()

        assert main(["eval", "--checkpoint", str(tmp_path / "ck"),
                     "--corpus", f"val={tmp_path / 'va'}", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc[0]["dataset"] == "val" and doc[0]["perplexity"] > 0

        assert main(["complete", "--checkpoint", str(tmp_path / "ck"),
                     "--prefix", "(raw)", "--strategy", "greedy",
                     "--max-new-tokens", "30"]) == 0
        assert "(raw)" in capsys.readouterr().out

    def test_complete_without_checkpoint_exit_2(self, monkeypatch, capsys):
        from flowcomplete.pipeline import CHECKPOINT_ENV_VAR

        monkeypatch.delenv(CHECKPOINT_ENV_VAR, raising=False)
        assert main(["complete", "--prefix", "(raw)"]) == 2

    def test_complete_uses_env_checkpoint(self, monkeypatch, tiny_checkpoint, capsys):
        from flowcomplete.pipeline import CHECKPOINT_ENV_VAR

        monkeypatch.setenv(CHECKPOINT_ENV_VAR, str(tiny_checkpoint))
        assert main(["complete", "--prefix", "(raw)", "--strategy", "greedy",
                     "--max-new-tokens", "30"]) == 0
        assert "(raw)" in capsys.readouterr().out

    def test_finetune(self, tmp_path, tiny_checkpoint, tiny_corpus, capsys):
        tok.write_corpus(tmp_path / "tr", tiny_corpus[:20])
        tok.write_corpus(tmp_path / "va", tiny_corpus[20:28])
        rc = main(["finetune", "--checkpoint", str(tiny_checkpoint),
                   "--train", str(tmp_path / "tr"),
                   "--val", str(tmp_path / "va"),
                   "--out", str(tmp_path / "ck2"),
                   "--max-epochs", "1", "--eval-interval", "5"])
        assert rc == 0
        _model, _vocab, meta = load_checkpoint(tmp_path / "ck2")
        assert meta["finetuned_from"] == str(tiny_checkpoint)
