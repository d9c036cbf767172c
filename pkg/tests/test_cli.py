"""CLI surface: subcommands, exit codes, environment seed override."""

import json

import numpy as np
import pytest

from scpp.cli import main


@pytest.fixture()
def config_path(tmp_path):
    cfg = {
        "model": {"psi": {"constant": 1.0}, "r": 3.0, "delta": 0.0,
                  "tau": 1.0, "alpha": 0.25, "beta": 0.75},
        "schedule": {"regime": "fast", "coef": 1.0, "power": 2.0},
        "n_grid": [100],
        "theta_true": 0.5,
        "replications": 8,
        "prior": {"uniform": True},
        "master_seed": 4242,
        "analyses": ["estimator_dist"],
        "output_dir": str(tmp_path / "out"),
        "reference_size": 800,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_writes_csv(config_path, tmp_path, capsys):
    rc = main(["simulate", "--config", str(config_path),
               "--out", str(tmp_path / "sims")])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out and out[0].endswith("events_n100_rep0.csv")
    header = open(out[0]).readline().strip()
    assert header == "trajectory_index,event_time"


def test_estimate_round_trip(config_path, tmp_path, capsys):
    main(["simulate", "--config", str(config_path),
          "--out", str(tmp_path / "sims")])
    capsys.readouterr()
    data = tmp_path / "sims" / "events_n100_rep0.csv"
    rc = main(["estimate", "--config", str(config_path),
               "--data", str(data), "--n", "100"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n"] == 100
    assert 0.25 <= payload["mle"] <= 0.75
    assert 0.25 < payload["bayes"] < 0.75
    assert np.isfinite(payload["loglik_at_mle"])


def test_experiment_and_report(config_path, tmp_path, capsys):
    rc = main(["experiment", "--config", str(config_path), "--threads", "2"])
    assert rc == 0
    out_dir = tmp_path / "out"
    for name in ("manifest.json", "summary.csv", "replications.csv",
                 "analyses.json"):
        assert (out_dir / name).exists()
    capsys.readouterr()
    rc = main(["report", "--from", str(out_dir), "--svg"])
    assert rc == 0
    rendered = capsys.readouterr().out.strip().splitlines()
    assert any(p.endswith("intensity.svg") for p in rendered)


def test_invalid_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {}}))
    assert main(["experiment", "--config", str(bad)]) == 2


def test_mislabeled_regime_exits_2(config_path, tmp_path):
    raw = json.loads(config_path.read_text())
    raw["schedule"] = {"regime": "slow", "coef": 1.0, "power": 2.0}
    bad = tmp_path / "bad2.json"
    bad.write_text(json.dumps(raw))
    assert main(["experiment", "--config", str(bad)]) == 2


def test_seed_env_override_changes_results(config_path, tmp_path, monkeypatch,
                                           capsys):
    main(["simulate", "--config", str(config_path),
          "--out", str(tmp_path / "s1")])
    monkeypatch.setenv("SCPP_SEED", "999")
    main(["simulate", "--config", str(config_path),
          "--out", str(tmp_path / "s2")])
    a = (tmp_path / "s1" / "events_n100_rep0.csv").read_text()
    b = (tmp_path / "s2" / "events_n100_rep0.csv").read_text()
    assert a != b


def test_limits_subcommand(tmp_path, capsys):
    out = tmp_path / "lim.json"
    rc = main(["limits", "--rho", "8.0", "--paths", "400", "--seed", "5",
               "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert abs(payload["E_eta2"] - 2.0) < 1.0
    assert payload["paths"] == 400


def test_limits_requires_full_rate_pair(capsys):
    assert main(["limits", "--a", "1.0", "--paths", "10"]) == 2
