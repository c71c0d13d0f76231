from pathlib import Path

import numpy as np
import pytest
import yaml

from cpgnmt.checkpoint import save_checkpoint
from cpgnmt.cli import main
from cpgnmt.data import generate_toy_corpus, toy_language
from cpgnmt.reports import parse_distance_matrix
from cpgnmt.training import model_to_checkpoint

from conftest import tiny_model

ROOT = Path(__file__).parent.parent


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    langs = [toy_language(c, 6) for c in "ABC"]
    manifest = generate_toy_corpus(root / "data", langs, [("A", "B"), ("A", "C")], {"train": 30, "dev": 4, "test": 4}, seed=1, max_len=5)
    cfg = {
        "manifest": str(manifest),
        "output_dir": str(root / "run"),
        "model": {"word_size": 6, "hidden_size": 6, "attention_size": 6, "embedding_size": 3, "dtype": "float64"},
        "training": {"batch_size": 8, "max_steps": 6, "validation_interval": 3, "patience": 2, "learning_rate": 0.01},
        "decode": {"beam": 2},
        "vocabulary": {"min_count": 1},
    }
    (root / "cfg.yaml").write_text(yaml.safe_dump(cfg))
    return root


def test_count_params_toy(capsys):
    code, out, _ = run(capsys, "count-params", "--config", ROOT / "configs" / "toy_count.yaml")
    lines = out.splitlines()
    assert code == 0
    assert lines[:3] == ["pairwise=1080", "cpg=1064", "audited=1064"]
    rows = [dict(kv.split("=") for kv in l.split("\t")) for l in lines[3:]]
    assert {r["variant"] for r in rows} >= {"pairwise", "per-language", "universal", "cpg", "cpg-grouped"}
    assert all(r["closed_form"] == r["audited"] for r in rows)


def test_train_translate_evaluate(workspace, capsys):
    code, out, _ = run(capsys, "train", "--config", workspace / "cfg.yaml", "--output-dir", workspace / "run")
    assert code == 0 and "best_val_bleu" in out
    run_dir = workspace / "run"
    assert (run_dir / "model.cpgc").exists() and (run_dir / "config.yaml").exists()
    assert (run_dir / "metrics.tsv").read_text().startswith("step\tpair\tloss\tval_bleu\n")

    (workspace / "in.txt").write_text("b1 b2 b3\n\nb4\n")
    code, _, _ = run(
        capsys, "translate", "--checkpoint", run_dir / "model.cpgc", "--src", "B", "--tgt", "C",
        "--input", workspace / "in.txt", "--output", workspace / "out.txt",
    )
    lines = (workspace / "out.txt").read_text().split("\n")
    assert code == 0 and len(lines) == 4 and lines[1] == ""
    assert all(tok.startswith("c") or tok == "<unk>" for tok in " ".join(lines).split())

    code, _, _ = run(
        capsys, "translate", "--checkpoint", run_dir / "model.cpgc", "--src", "B", "--pivot", "A", "--tgt", "C",
        "--input", workspace / "in.txt", "--output", workspace / "pivot.txt",
    )
    assert code == 0 and len((workspace / "pivot.txt").read_text().split("\n")) == 4

    code, out, _ = run(capsys, "evaluate", "--checkpoint", run_dir / "model.cpgc", "--manifest", workspace / "data" / "manifest.yaml", "--split", "dev", "--beam", "1")
    assert code == 0
    assert out.splitlines()[0] == "pair\tmetric\tvalue"
    assert any(l.startswith("Mean\tbleu\t") for l in out.splitlines())


def test_train_is_idempotent(workspace, capsys):
    outs = []
    for name in ("r1", "r2"):
        code, _, _ = run(capsys, "train", "--config", workspace / "cfg.yaml", "--output-dir", workspace / name, "--seed", 5)
        assert code == 0
        outs.append(((workspace / name / "model.cpgc").read_bytes(), (workspace / name / "metrics.tsv").read_bytes()))
    assert outs[0] == outs[1]


def test_preprocess_writes_vocabularies(workspace, capsys):
    code, out, _ = run(capsys, "preprocess", "--config", workspace / "cfg.yaml", "--output-dir", workspace / "pre")
    assert code == 0
    assert sorted(p.name for p in (workspace / "pre").iterdir()) == ["vocab.A.txt", "vocab.B.txt", "vocab.C.txt"]
    assert out.splitlines()[0].startswith("A\t")


def test_adapt_adds_language(workspace, capsys, tmp_path):
    model = tiny_model("cpg", codes=("A", "B"), word_size=6, hidden_size=6, attention_size=6, embedding_size=3)
    save_checkpoint(model_to_checkpoint(model), tmp_path / "ab.cpgc")
    code, out, _ = run(
        capsys, "adapt", "--config", workspace / "cfg.yaml", "--checkpoint", tmp_path / "ab.cpgc", "--lang", "C", "--output", tmp_path / "abc.cpgc"
    )
    assert code == 0 and "lang_emb.C" in out
    code, out, _ = run(capsys, "analyze-embeddings", "--checkpoint", tmp_path / "abc.cpgc")
    codes, _ = parse_distance_matrix(out)
    assert codes == ["A", "B", "C"]


def test_translate_unknown_language_fails(capsys, tmp_path):
    save_checkpoint(model_to_checkpoint(tiny_model("cpg", codes=("A", "B"))), tmp_path / "ab.cpgc")
    code, _, err = run(capsys, "translate", "--checkpoint", tmp_path / "ab.cpgc", "--src", "A", "--tgt", "C")
    assert code != 0
    assert err.startswith("error\tregistry\t") and err.count("\n") == 1


def test_analyze_five_languages(capsys, tmp_path):
    save_checkpoint(model_to_checkpoint(tiny_model("cpg", codes=("A", "B", "C", "D", "E"))), tmp_path / "five.cpgc")
    code, out, _ = run(capsys, "analyze-embeddings", "--checkpoint", tmp_path / "five.cpgc", "--output", tmp_path / "d.tsv")
    assert code == 0 and (tmp_path / "d.tsv").read_text() == out
    codes, d = parse_distance_matrix(out)
    assert codes == list("ABCDE") and d.shape == (5, 5)
    np.testing.assert_array_equal(d, d.T)
    assert np.all(np.diag(d) == 0.0)


def test_error_reporting(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--config", tmp_path / "missing.yaml")
    assert code == 2 and err.startswith("error\tpath\t")
    bad = tmp_path / "bad.yaml"
    bad.write_text("model:\n  foo: 1\n")
    code, _, err = run(capsys, "train", "--config", bad)
    assert code != 0 and "model.foo" in err and err.count("\n") == 1
    code, _, err = run(capsys, "frobnicate")
    assert code == 1 and err.startswith("error\tusage\t")
    code, _, err = run(capsys, "analyze-embeddings", "--checkpoint", tmp_path / "none.cpgc")
    assert code == 2
