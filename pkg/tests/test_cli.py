"""Command line driver: configs, exit codes, deterministic outputs."""

import json

import pytest

from relaydyn import cli
from relaydyn.errors import NoConvergence


def run_cli(args):
    return cli.main(args)


def test_print_config_lists_all_defaults(capsys):
    assert run_cli(["print-config"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert set(data) == set(cli.DEFAULTS)
    assert data["simulate"]["tau"] == 4.2


def test_print_config_merges_user_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tau": 4.4}))
    assert run_cli(["print-config", "sweep", "--config", str(cfg)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["tau"] == 4.4
    assert data["n_alpha"] == cli.DEFAULTS["sweep"]["n_alpha"]


def test_unknown_config_key_is_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert run_cli(["simulate", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_malformed_config_is_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run_cli(["sweep", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 2


def test_bad_history_kind_is_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"history": "banana"}))
    assert run_cli(["simulate", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 2


def test_validation_failure_is_exit_4(tmp_path, capsys):
    # below the collision the attractor collapses to a point, so the
    # polygon segmentation has nothing to work with
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tau": 4.2, "alpha": -0.49}))
    assert run_cli(["polygon", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 4
    assert "validation error" in capsys.readouterr().err


def test_numerical_failure_is_exit_3(tmp_path, monkeypatch, capsys):
    def boom(config, out_dir, seed):
        raise NoConvergence("forced")

    monkeypatch.setitem(cli.COMMANDS, "sweep", boom)
    assert run_cli(["sweep", "--out", str(tmp_path / "o")]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_simulate_outputs_are_byte_identical(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"horizon": 12.0, "history": "random"}))
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert run_cli(["simulate", "--config", str(cfg), "--seed", "5",
                        "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("trajectory.csv", "events.json", "manifest.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 5
    assert sorted(manifest["outputs"]) == manifest["outputs"]


def test_simulate_different_seed_changes_random_history(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"horizon": 8.0, "history": "random"}))
    hashes = []
    for seed in ("1", "2"):
        out = tmp_path / f"s{seed}"
        assert run_cli(["simulate", "--config", str(cfg), "--seed", seed,
                        "--out", str(out)]) == 0
        hashes.append((out / "trajectory.csv").read_bytes())
    assert hashes[0] != hashes[1]


def test_sweep_command_writes_tables(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha_range": [-0.47, -0.45], "n_alpha": 5,
                               "n_total": 120, "n_transient": 20}))
    out = tmp_path / "o"
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    body = (out / "sweep.csv").read_text().splitlines()
    assert body[0] == "alpha,env_min_x,env_max_x,visited_plus,visited_minus,escaped"
    assert len(body) == 6
    marks = json.loads((out / "marks.json").read_text())
    assert marks["surface_alpha"]


def test_surface_command_writes_rows(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_tau": 6, "n_alpha": 6,
                               "tau_range": [3.5, 5.0],
                               "alpha_range": [-0.8, 0.2]}))
    out = tmp_path / "o"
    assert run_cli(["surface", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "surface.csv").read_text().splitlines()
    assert lines[0] == "tau,alpha,epsilon,q,lambda_plus,residual"
    assert len(lines) > 10
    for ln in lines[1:]:
        cells = ln.split(",")
        assert float(cells[2]) > 0      # epsilon
        assert float(cells[3]) > 0      # transversality q
        assert abs(float(cells[5])) < 1e-10


def test_polygon_command_summary(tmp_path):
    out = tmp_path / "o"
    assert run_cli(["polygon", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["monotone"] is True
    assert summary["arc_count"] >= 2
    assert summary["visited_plus"] and summary["visited_minus"]
    lines = (out / "circle_map.csv").read_text().splitlines()
    assert lines[0] == "phi_k,phi_next"
    assert len(lines) > 300


def test_threads_flag_validated(tmp_path):
    assert run_cli(["sweep", "--threads", "0", "--out", str(tmp_path / "o")]) == 2
