import json
import os
from pathlib import Path

import pytest

from btlab.cli import main

TRAIN = ["--max-updates", "6", "--checkpoint-interval", "3", "--batch-size", "400", "--learning-rate", "0.01",
         "--emb-dim", "4", "--hidden-dim", "8"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A toy task plus a small target-to-source generator, built through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    cwd = os.getcwd()
    os.chdir(root)
    try:
        toy_config = {"channel": json.loads(json.dumps(__import__("btlab.toyharness", fromlist=["x"])
                                                       .tiny_channel().to_dict()))}
        Path("toy.json").write_text(json.dumps(toy_config))
        assert main(["toytask", "--output-dir", "data", "--config", "toy.json", "--bilingual", "200",
                     "--mono", "100", "--dev", "30", "--seed", "3"]) == 0
        assert main(["train", "--src", "data/train.tgt", "--tgt", "data/train.src", "--src-vocab", "data/vocab.tgt",
                     "--tgt-vocab", "data/vocab.src", "--dev-src", "data/dev.tgt", "--dev-tgt", "data/dev.src",
                     "--output", "gen.json", *TRAIN]) == 0
        yield root
    finally:
        os.chdir(cwd)


@pytest.fixture
def in_ws(workspace, monkeypatch):
    monkeypatch.chdir(workspace)
    return workspace


def digest(path):
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_toytask_outputs(in_ws):
    for name in ("train.src", "train.tgt", "mono.tgt", "heldout.src", "dev.src", "dev.tgt", "vocab.src",
                 "vocab.tgt", "config.json", "manifest.json"):
        assert (in_ws / "data" / name).is_file()
    assert len((in_ws / "data/mono.tgt").read_text().splitlines()) == 100


def test_augment_twice_byte_identical(in_ws):
    args = ["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--strategy", "restricted",
            "--tau", "0.1", "--seed", "7", "--n", "2"]
    assert main(args + ["--output", "aug_a"]) == 0
    assert main(args + ["--output", "aug_b", "--workers", "3"]) == 0
    for suffix in (".tgt", ".src.1", ".src.2"):
        assert digest(f"aug_a{suffix}") == digest(f"aug_b{suffix}")
    meta = json.loads(Path("aug_a.json").read_text())
    assert meta["spec"]["tau"] == 0.1 and meta["n"] == 2


def test_usage_errors(in_ws, capsys):
    assert main(["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--output", "x",
                 "--strategy", "beam", "--n", "4"]) == 1
    assert "deterministic strategy yields duplicate sources" in capsys.readouterr().err
    assert main(["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--output", "x",
                 "--strategy", "sample", "--tau", "0.2"]) == 1
    assert main(["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--output", "x",
                 "--strategy", "restricted:0.1", "--tau", "0.2"]) == 1
    assert main(["augment", "--generator", "missing.json", "--mono", "data/mono.tgt", "--output", "x"]) == 1
    assert main(["translate", "--model", "gen.json"]) == 1
    assert main(["nonsense"]) == 1
    assert main(["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--output", "x",
                 "--strategy", "restricted:0.7"]) == 1


def test_runtime_error_exit_code(in_ws, capsys):
    Path("bad.json").write_text("{}")
    assert main(["translate", "--model", "bad.json", "--input", "data/dev.tgt", "--output", "o.txt"]) == 2
    assert "not a" in capsys.readouterr().err


def test_env_worker_default(in_ws, monkeypatch):
    monkeypatch.setenv("BTLAB_WORKERS", "2")
    assert main(["translate", "--model", "gen.json", "--input", "data/dev.tgt", "--output", "tr.txt",
                 "--strategy", "sample"]) == 0
    manifest = json.loads(Path("tr.txt.manifest.json").read_text())
    assert manifest["config"]["workers"] is None
    monkeypatch.setenv("BTLAB_WORKERS", "zero")
    assert main(["translate", "--model", "gen.json", "--input", "data/dev.tgt", "--output", "tr.txt"]) == 1


def test_bleu_command(in_ws, capsys):
    assert main(["bleu", "--hyp", "data/dev.src", "--ref", "data/dev.src", "--output", "bleu.json"]) == 0
    assert json.loads(Path("bleu.json").read_text())["score"] == pytest.approx(100.0)


def test_ibm1_command(in_ws):
    assert main(["ibm1", "--src", "data/train.src", "--tgt", "data/train.tgt", "--output", "lex",
                 "--iterations", "5"]) == 0
    meta = json.loads(Path("lex.json").read_text())
    assert len(meta["loglik"]) == 5 and meta["entropy"] > 0
    rows = Path("lex.tsv").read_text().splitlines()
    assert all(len(r.split("\t")) == 3 for r in rows)


def test_stats_command(in_ws):
    assert main(["stats", "--model", "g=gen.json", "--src", "data/mono.tgt", "--tgt", "data/heldout.src",
                 "--output", "st", "--ns", "1,2,5"]) == 0
    report = json.loads(Path("st.json").read_text())
    assert set(report["models"]) == {"g"}
    assert Path("st.g.mass.csv").read_text().startswith("N,mass")
    assert Path("st.png").stat().st_size > 0


def test_train_with_pseudo_and_init_from(in_ws):
    assert main(["augment", "--generator", "gen.json", "--mono", "data/mono.tgt", "--strategy", "beam",
                 "--output", "bt"]) == 0
    common = ["--src", "data/train.src", "--tgt", "data/train.tgt", "--src-vocab", "data/vocab.src",
              "--tgt-vocab", "data/vocab.tgt", "--dev-src", "data/dev.src", "--dev-tgt", "data/dev.tgt", *TRAIN]
    assert main(["train", *common, "--output", "base.json"]) == 0
    assert main(["train", *common, "--pseudo", "bt", "--init-from", "base.json", "--output", "ft.json"]) == 0
    assert main(["train", *common, "--pseudo", "bt", "--mode", "regenerate", "--output", "x.json"]) == 1
    log = Path("ft.json.log.jsonl").read_text().splitlines()
    assert len(log) == 2


def test_rerun_reproduces_every_command(in_ws, capsys):
    manifests = ["data/manifest.json", "gen.json.manifest.json", "aug_a.json.manifest.json",
                 "lex.json.manifest.json", "st.json.manifest.json", "tr.txt.manifest.json",
                 "bleu.json.manifest.json", "ft.json.manifest.json"]
    for m in manifests:
        if not Path(m).exists():
            pytest.skip(f"{m} missing; run the whole module")
        assert main(["rerun", m, "--workers", "2"]) == 0, m
        assert "byte-identically" in capsys.readouterr().out


def test_rerun_detects_changed_input(in_ws, tmp_path):
    Path("h.txt").write_text("a b\n")
    assert main(["bleu", "--hyp", "h.txt", "--ref", "h.txt", "--output", "hb.json"]) == 0
    Path("h.txt").write_text("a c\n")
    assert main(["rerun", "hb.json.manifest.json"]) == 2


def test_scenario_command(in_ws):
    assert main(["scenario", "--data-dir", "data", "--output-dir", "scen", "--strategies",
                 "beam,sample,sample-nols,restricted:0.1,nbest:50", "--split-ratio", "0.5", "--iterations", "2",
                 *TRAIN]) == 0
    report = json.loads(Path("scen/report.json").read_text())
    assert [r["name"] for r in report["rows"]] == ["baseline", "beam", "sample", "sample-nols",
                                                   "restricted:0.1", "nbest:50", "reference"]
    assert Path("scen/report.png").is_file() and Path("scen/report.txt").is_file()
    csv_rows = Path("scen/report.csv").read_text().splitlines()
    assert csv_rows[0].startswith("name,entropy,") and len(csv_rows) == len(report["rows"]) + 1
    assert main(["scenario", "--data-dir", "data", "--output-dir", "scen2", "--strategies", "bogus"]) == 1
