import json

import numpy as np
import pytest

from entropy_flow import build_uniform_grid
from entropy_flow import export
from entropy_flow.cli import main
from entropy_flow.scenario import ScenarioConfig, config_from_mapping, load_config, run_scenario, smooth_noise
from entropy_flow.errors import ConfigInvalid

ARTIFACTS = {"trajectory.csv", "final_density.csv", "limit_density.csv", "snapshots.csv", "summary.json"}


def write_config(path, **extra):
    lines = ["carrier.a = 0", "carrier.b = 2", "carrier.n = 80", "dt = 0.02", "max_steps = 3000"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    path.write_text("# test scenario\n" + "\n".join(lines) + "\n")
    return path


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.cfg", **{"output.dir": tmp_path / "out"})
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == ARTIFACTS
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is True
    assert summary["final_dist_linf"] < 1e-6
    assert summary["final_entropy"] == pytest.approx(np.log(2), abs=1e-9)
    assert "converged after" in capsys.readouterr().out


def test_mass_energy_scenario(tmp_path):
    cfg = write_config(
        tmp_path / "s.cfg",
        mode="mass-energy",
        initial="gibbs-perturbed",
        **{"energy.h": "quadratic", "energy.E": 1.0, "initial.noise": 0.4, "seed": 3, "output.dir": tmp_path / "o"},
    )
    assert main(["run", "--config", str(cfg)]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["converged"] and summary["mode"] == "mass-energy"
    final = export.read_density_csv(tmp_path / "o" / "final_density.csv")
    limit = export.read_density_csv(tmp_path / "o" / "limit_density.csv")
    assert np.max(np.abs(final.values - limit.values)) < 1e-6


def test_runs_are_deterministic(tmp_path):
    cfg = write_config(tmp_path / "s.cfg", initial="gibbs-perturbed", seed=11)
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--set", f"output.dir={tmp_path / name}"]) == 0
    for artifact in ARTIFACTS:
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_output_env_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "s.cfg", **{"output.dir": tmp_path / "ignored"})
    monkeypatch.setenv("ENTROPY_FLOW_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "summary.json").exists()
    assert not (tmp_path / "ignored").exists()


@pytest.mark.parametrize(
    "extra",
    [
        {"carrier.b": "-1"},
        {"mode": "sideways"},
        {"dt": "fast"},
        {"mode": "mass-energy"},
        {"bogus.key": "1"},
        {"initial.amplitude": "1.5"},
    ],
)
def test_config_errors_exit_2(tmp_path, extra, capsys):
    cfg = write_config(tmp_path / "s.cfg", **extra)
    assert main(["run", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unreachable_energy_is_runtime_error(tmp_path):
    cfg = write_config(
        tmp_path / "s.cfg", mode="mass-energy", **{"energy.h": "linear", "energy.E": 5.0, "output.dir": tmp_path / "o"}
    )
    assert main(["run", "--config", str(cfg)]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["error"]["code"]
    assert summary["converged"] is False


def test_budget_exhaustion_still_succeeds(tmp_path):
    cfg = write_config(tmp_path / "s.cfg", max_steps=5, **{"output.dir": tmp_path / "o"})
    assert main(["run", "--config", str(cfg)]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["converged"] is False
    assert summary["steps"] == 5


def test_custom_csv_inputs(tmp_path):
    g = build_uniform_grid(0, 2, 80)
    export.write_field_csv(tmp_path / "p0.csv", g, 1 + 0.5 * g.nodes)
    export.write_field_csv(tmp_path / "h.csv", g, np.exp(-g.nodes), column="h")
    cfg = write_config(
        tmp_path / "s.cfg",
        mode="mass-energy",
        initial="custom-csv",
        **{"initial.path": "p0.csv", "energy.h": "custom-csv", "energy.path": "h.csv", "energy.E": 0.45},
    )
    loaded = load_config(cfg)
    assert loaded.initial_path == str(tmp_path / "p0.csv")
    status, summary = run_scenario(loaded, tmp_path / "o")
    assert status == 0 and summary["converged"]


def test_stability_warning_reaches_summary(tmp_path):
    cfg = write_config(tmp_path / "s.cfg", dt=0.6, max_steps=3, **{"output.dir": tmp_path / "o"})
    main(["run", "--config", str(cfg)])
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["warnings"]


def test_sweep(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.cfg", **{"output.dir": tmp_path / "sw"})
    assert main(["sweep", "--config", str(cfg), "--vary", "gamma=0.5,1,2", "--workers", "3"]) == 0
    for v in ("0.5", "1", "2"):
        assert json.loads((tmp_path / "sw" / f"gamma={v}" / "summary.json").read_text())["converged"]
    table = capsys.readouterr().out
    assert table.count("converged") == 3


def test_sweep_rejects_bad_vary(tmp_path):
    cfg = write_config(tmp_path / "s.cfg")
    assert main(["sweep", "--config", str(cfg), "--vary", "gamma"]) == 2


def test_config_mapping_and_noise():
    cfg = config_from_mapping({"gamma": "2.5", "carrier.n": "10"})
    assert cfg.gamma == 2.5 and cfg.n == 10
    with pytest.raises(ConfigInvalid):
        config_from_mapping({"gamma": "-1"})
    g1, g2 = build_uniform_grid(0, 1, 50), build_uniform_grid(0, 1, 50)
    a = smooth_noise(g1, 4)
    np.testing.assert_array_equal(a, smooth_noise(g2, 4))
    assert np.max(np.abs(a)) <= 1.0
    assert not np.array_equal(a, smooth_noise(g1, 5))


@pytest.mark.slow
def test_verify_subcommand_warns_on_large_step(capsys):
    # dt * gamma above the cap: verify still runs and reports the warning
    status = main(["verify", "--dt", "0.6"])
    captured = capsys.readouterr()
    assert "criteria passed" in captured.out
    assert "exceeds the stability cap" in captured.out
    last = captured.out.strip().splitlines()[-1]
    assert status == (0 if last == "10/10 criteria passed" else 1)
