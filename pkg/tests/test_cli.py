import json

import pytest

from iga_lwp.cli import main
from iga_lwp.graph import load_edge_list


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text(json.dumps({
        "dataset": "synthetic:neural@0.1", "num_repeats": 1, "num_targets": 3, "ratios": [0.5],
        "sea": {"epochs": 20, "hidden_dim": 8, "embed_dim": 4},
        "embedding": {"dim": 8, "walks_per_node": 2, "walk_length": 8, "epochs": 10},
        "gcn": {"epochs": 10, "hidden": 8},
    }))
    return str(path)


def test_train_attack_evaluate(tmp_path, config, capsys):
    out = str(tmp_path / "run")
    assert main(["train", "--config", config, "--seed", "3", "--out", out]) == 0
    assert main(["attack", "--out", out, "--mode", "local", "--budget", "2"]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--out", out, "--graph", f"{out}/adversarial.txt", "--target-index", "0"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["n"] == 1 and result["rmse"] >= 0
    trace = json.loads((tmp_path / "run" / "trace.json").read_text())
    assert len(trace["touched_links"]) <= 2
    assert load_edge_list(f"{out}/adversarial.txt").edge_count > 0
    assert main(["attack", "--out", out, "--attack", "sacn", "--ratio", "0.5"]) == 0


def test_sweep_transfer_report(tmp_path, config, capsys):
    out = str(tmp_path / "sweep")
    assert main(["sweep", "--config", config, "--out", out, "--seed", "1"]) == 0
    text = capsys.readouterr().out
    assert "IGA-LWP" in text and "[local, ratio 0.5]" in text
    assert main(["report", "--out", out]) == 0
    assert (tmp_path / "sweep" / "summary.csv").exists()
    tout = str(tmp_path / "transfer")
    assert main(["transfer", "--config", config, "--out", tout, "--seed", "1"]) == 0
    assert "node2vec" in capsys.readouterr().out


def test_exit_codes(tmp_path, config):
    assert main(["attack", "--out", str(tmp_path / "missing")]) == 1
    assert main(["train", "--dataset", "synthetic:bogus", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 1\n1 2\n")
    assert main(["train", "--dataset", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["report", "--out", str(tmp_path / "nothing")]) == 1
    with pytest.raises(SystemExit):
        main(["attack", "--mode", "sideways"])


def test_runtime_failure_exit_code(tmp_path, config, monkeypatch):
    import iga_lwp.cli as cli

    def boom(*a, **k):
        raise RuntimeError("diverged")
    monkeypatch.setattr(cli, "train", boom)
    assert main(["train", "--config", config, "--out", str(tmp_path)]) == 2
