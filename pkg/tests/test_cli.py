import pytest

from vecdt import metrics
from vecdt.checkpoint import load_checkpoint
from vecdt.cli import main

FAST = """topology:
  road_length: 1200.0
ddpg:
  actor_hidden: [8]
  critic_hidden: [8]
  batch_size: 4
  warmup: 4
experiment:
  eval_epochs: 3
  eval_warmup: 1
  train_epochs: 3
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text(FAST)
    return p


def test_validate_config(cfg_path, tmp_path, capsys):
    assert main(["validate-config", "--config", str(cfg_path)]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("task:\n  deadline: 3.0\n")
    assert main(["validate-config", "--config", str(bad)]) == 2
    assert "topology.road_length" in capsys.readouterr().err


def test_run_writes_per_seed_csvs(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--scheme", "no_coop", "--seeds", "1,2,3",
                 "--out", str(out)]) == 0
    for seed in (1, 2, 3):
        assert (out / f"epochs_no_coop_seed{seed}.csv").exists()
        assert (out / f"sessions_no_coop_seed{seed}.csv").exists()
    assert len(metrics.read_rows(out / "summary.csv")) == 3
    assert "no_coop" in capsys.readouterr().out


def test_run_with_sweep_and_env_override(cfg_path, tmp_path, monkeypatch):
    monkeypatch.setenv("VECDT_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(cfg_path), "--scheme", "migrate_50,no_coop", "--seeds", "1",
                 "--sweep", "E2=0.25,1.0", "--out", str(tmp_path / "ignored")]) == 0
    rows = metrics.read_rows(tmp_path / "env" / "summary.csv")
    assert {(r["scheme"], r["value"]) for r in rows} == {
        ("migrate_50", "0.25"), ("migrate_50", "1.0"), ("no_coop", "0.25"), ("no_coop", "1.0")}
    assert not (tmp_path / "ignored").exists()


def test_bad_arguments(cfg_path):
    assert main(["run", "--config", str(cfg_path), "--scheme", "greedy"]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--sweep", "speed=1,2"])


def test_train_resume_and_evaluate(cfg_path, tmp_path):
    out = tmp_path / "o"
    ck = tmp_path / "agent.ckpt"
    base = ["train", "--config", str(cfg_path), "--scheme", "dt_only", "--seeds", "2",
            "--checkpoint", str(ck), "--out", str(out), "--every", "2"]
    assert main(base + ["--epochs", "4"]) == 0
    assert load_checkpoint(ck).epoch == 4
    assert main(base + ["--epochs", "6"]) == 0
    resumed = metrics.read_rows(out / "train_dt_only_seed2.csv")

    ck2, out2 = tmp_path / "straight.ckpt", tmp_path / "o2"
    assert main(["train", "--config", str(cfg_path), "--scheme", "dt_only", "--seeds", "2",
                 "--checkpoint", str(ck2), "--out", str(out2), "--epochs", "6"]) == 0
    assert metrics.read_rows(out2 / "train_dt_only_seed2.csv") == resumed
    assert len(resumed) == 6

    assert main(["evaluate", "--checkpoint", str(ck), "--out", str(out), "--epochs", "2", "--seeds", "9"]) == 0
    assert (out / "epochs_dt_only_seed9.csv").exists()
    assert (out / "policy_dt_only_seed9.csv").exists()
    assert (out / "twin_dt_only_seed9.jsonl").exists()
    assert (out / "assignments_dt_only_seed9.csv").exists()


def test_train_refuses_heuristic_scheme(cfg_path, tmp_path):
    assert main(["train", "--config", str(cfg_path), "--scheme", "no_coop", "--out", str(tmp_path)]) == 2


def test_train_refuses_corrupt_checkpoint(cfg_path, tmp_path):
    ck = tmp_path / "x.ckpt"
    ck.write_bytes(b"garbage")
    assert main(["train", "--config", str(cfg_path), "--checkpoint", str(ck), "--out", str(tmp_path)]) == 2
