import csv
import json
import subprocess
import sys

import pytest

from nnlda.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--n-docs", 300, "--seed", 2, "--out-dir", d) == 0
    return d


@pytest.fixture(scope="module")
def trained(workdir):
    assert run("train", "--data", workdir / "synthetic.csv", "--prior", "nnlda", "--topics", 4,
               "--max-em-iters", 15, "--threads", 1, "--out-dir", workdir) == 0
    return workdir / "model.json"


def test_synth_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("synth", "--n-docs", 50, "--seed", 9, "--out", name, "--out-dir", tmp_path) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a.csv")))
    assert len(rows) == 50
    assert set(rows[0]) == {"text", "product", "description", "category"}
    manifest = json.loads((tmp_path / "manifest-synth.json").read_text())
    assert manifest["status"] == "ok" and manifest["seed"] == 9


def test_train_outputs(trained, workdir):
    model = json.loads(trained.read_text())
    assert model["schema"] == "nnlda.checkpoint/1"
    trace = list(csv.reader(open(workdir / "elbo_trace.csv")))
    assert trace[0] == ["iteration", "elbo", "seconds"]
    assert len(trace) > 1
    manifest = json.loads((workdir / "manifest-train.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["outputs"]["model"].endswith("model.json")


def test_eval_metrics(trained, workdir):
    assert run("eval", "--model", trained, "--data", workdir / "synthetic.csv",
               "--tasks", "perplexity,grouping,features,lift", "--out-dir", workdir) == 0
    metrics = json.loads((workdir / "metrics.json").read_text())
    for key in ("log_perplexity", "macro_precision", "macro_recall", "macro_f1", "micro_f1",
                "lift_below_one_fraction"):
        assert key in metrics
    rows = list(csv.reader(open(workdir / "features.csv")))
    assert len(rows) == 301 and len(rows[0]) == 6
    assert (workdir / "grouping_confusion.csv").exists()
    assert (workdir / "lift.csv").exists()


def test_topics_sweep(workdir, tmp_path):
    data = workdir / "synthetic.csv"
    for K in (2, 3):
        assert run("train", "--data", data, "--prior", "lda", "--topics", K, "--max-em-iters", 5,
                   "--out-dir", tmp_path, "--model-out", f"m{K}.json") == 0
    assert run("eval", "--model", tmp_path / "m{K}.json", "--data", data,
               "--topics-sweep", "2,3", "--out-dir", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "perplexity_sweep.csv")))
    assert rows[0] == ["K", "log_perplexity"] and [r[0] for r in rows[1:]] == ["2", "3"]


def test_generate(trained, capsys):
    assert run("generate", "--model", trained, "--side", "product=TV",
               "--side", "description=quality", "--n-words", 5) == 0
    words = capsys.readouterr().out.split()
    assert len(words) == 5


@pytest.mark.parametrize("argv", [
    ["synth", "--n-docs", "0"],
    ["train"],
    ["eval", "--model", "m.json", "--data", "d.csv", "--tasks", "bogus"],
    ["train", "--data", "x.csv", "--prior", "plsa"],
])
def test_usage_errors(argv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(argv + ["--out-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_generate_unknown_value(trained):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--model", trained, "--side", "product=car")
    assert exc.value.code == 2


def test_missing_file_is_runtime_error(tmp_path):
    assert run("train", "--data", tmp_path / "nope.csv", "--out-dir", tmp_path) == 1


def test_corrupt_checkpoint(tmp_path, workdir):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("eval", "--model", bad, "--data", workdir / "synthetic.csv",
               "--out-dir", tmp_path) == 1


def test_thread_env(workdir, tmp_path, monkeypatch):
    data = workdir / "synthetic.csv"
    for name, env in (("a", "1"), ("b", "4")):
        monkeypatch.setenv("NNLDA_THREADS", env)
        assert run("train", "--data", data, "--max-em-iters", 5, "--threads", 2,
                   "--out-dir", tmp_path / name) == 0
    assert (tmp_path / "a" / "model.json").read_bytes() == (tmp_path / "b" / "model.json").read_bytes()
    monkeypatch.setenv("NNLDA_THREADS", "zero")
    with pytest.raises(SystemExit):
        run("train", "--data", data, "--out-dir", tmp_path / "c")


def test_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nnlda", "synth", "--n-docs", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 2
    res = subprocess.run([sys.executable, "-m", "nnlda", "synth", "--n-docs", "5",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
