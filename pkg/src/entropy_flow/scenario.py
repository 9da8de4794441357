"""Scenario configuration, initial densities, and the on-disk run artifacts."""

from __future__ import annotations

import dataclasses
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .density import DensityField, ScalarField, differential_entropy, project_mass
from .dynamics import EnergyDensity, Mode, SgParams, StabilityWarning
from .errors import ConfigInvalid, EntropyFlowError
from .grid import Grid, build_uniform_grid
from .integrator import Trajectory, project_mass_energy, run
from .maxent import gibbs_solve, uniform_limit

log = logging.getLogger(__name__)

OUTPUT_ENV = "ENTROPY_FLOW_OUT"
INITIAL_KINDS = ("uniform", "perturbed-sine", "gibbs-perturbed", "custom-csv")
ENERGY_KINDS = ("linear", "quadratic", "custom-csv")
NOISE_MODES = 6


@dataclass
class ScenarioConfig:
    a: float = 0.0
    b: float = 2.0
    n: int = 500
    mode: str = "mass-only"
    gamma: float = 1.0
    dt: float = 0.01
    max_steps: int = 100_000
    stop_tol: float = 1e-9
    floor: float = 1e-12
    initial: str = "perturbed-sine"
    amplitude: float = 0.5
    noise: float = 0.3
    initial_path: str | None = None
    energy_h: str | None = None
    energy_path: str | None = None
    energy_E: float | None = None
    seed: int = 0
    output_dir: str = "out"
    output_stride: int | None = None
    warnings: list[str] = field(default_factory=list, compare=False)

    def validate(self) -> ScenarioConfig:
        problems = []
        if not self.a < self.b:
            problems.append("carrier.a must be below carrier.b")
        if self.n < 1:
            problems.append("carrier.n must be positive")
        if self.mode not in (m.value for m in Mode):
            problems.append(f"mode must be one of {[m.value for m in Mode]}")
        if not self.gamma > 0:
            problems.append("gamma must be positive")
        if not self.dt > 0:
            problems.append("dt must be positive")
        if self.max_steps < 0:
            problems.append("max_steps must be nonnegative")
        if not self.stop_tol > 0:
            problems.append("stop_tol must be positive")
        if not self.floor > 0:
            problems.append("floor must be positive")
        if self.initial not in INITIAL_KINDS:
            problems.append(f"initial must be one of {INITIAL_KINDS}")
        if self.initial == "custom-csv" and not self.initial_path:
            problems.append("initial = custom-csv needs initial.path")
        if self.initial == "perturbed-sine" and not abs(self.amplitude) < 1:
            problems.append("initial.amplitude must lie in (-1, 1) to keep the density positive")
        if self.initial == "gibbs-perturbed" and not 0 <= self.noise < 1:
            problems.append("initial.noise must lie in [0, 1)")
        if self.mode == Mode.MASS_ENERGY.value:
            if self.energy_h is None or self.energy_E is None:
                problems.append("mass-energy mode needs energy.h and energy.E")
            elif self.energy_h not in ENERGY_KINDS:
                problems.append(f"energy.h must be one of {ENERGY_KINDS}")
            elif self.energy_h == "custom-csv" and not self.energy_path:
                problems.append("energy.h = custom-csv needs energy.path")
        if self.output_stride is not None and self.output_stride < 1:
            problems.append("output.stride must be a positive integer")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self


# config key -> (dataclass field, converter)
_KEYS = {
    "carrier.a": ("a", float),
    "carrier.b": ("b", float),
    "carrier.n": ("n", int),
    "mode": ("mode", str),
    "gamma": ("gamma", float),
    "dt": ("dt", float),
    "max_steps": ("max_steps", int),
    "stop_tol": ("stop_tol", float),
    "floor": ("floor", float),
    "initial": ("initial", str),
    "initial.amplitude": ("amplitude", float),
    "initial.noise": ("noise", float),
    "initial.path": ("initial_path", str),
    "energy.h": ("energy_h", str),
    "energy.path": ("energy_path", str),
    "energy.E": ("energy_E", float),
    "seed": ("seed", int),
    "output.dir": ("output_dir", str),
    "output.stride": ("output_stride", int),
}


def parse_assignments(lines, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigInvalid(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def config_from_mapping(values: dict[str, str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    updates = {}
    for key, text in values.items():
        if key not in _KEYS:
            raise ConfigInvalid(f"unknown key {key!r}")
        name, conv = _KEYS[key]
        try:
            updates[name] = conv(text)
        except ValueError as exc:
            raise ConfigInvalid(f"{key}: cannot parse {text!r}") from exc
    cfg = dataclasses.replace(base or ScenarioConfig(), **updates)
    return cfg.validate()


def load_config(path, overrides=()) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    values = parse_assignments(text.splitlines(), str(path))
    values.update(parse_assignments(overrides, "--set"))
    cfg = config_from_mapping(values)
    # relative data paths are resolved against the config file
    for name in ("initial_path", "energy_path"):
        p = getattr(cfg, name)
        if p and not Path(p).is_absolute():
            setattr(cfg, name, str(path.parent / p))
    return cfg


def smooth_noise(grid: Grid, seed: int, modes: int = NOISE_MODES) -> np.ndarray:
    """Seeded trigonometric noise with sup-norm at most 1.

    Defined as a function of position, so the same seed gives the same
    profile on every grid resolution.
    """
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=modes) / np.arange(1, modes + 1)
    phase = rng.uniform(0.0, 2 * np.pi, size=modes)
    a, b = grid.bounds
    x = (grid.nodes - a) / (b - a)
    k = np.arange(1, modes + 1)
    noise = (coef[:, None] * np.cos(np.pi * k[:, None] * x[None, :] + phase[:, None])).sum(axis=0)
    return noise / np.abs(coef).sum()


def build_energy(cfg: ScenarioConfig, grid: Grid) -> EnergyDensity | None:
    if Mode(cfg.mode) is Mode.MASS_ONLY:
        return None
    if cfg.energy_h == "linear":
        h = grid.nodes.copy()
    elif cfg.energy_h == "quadratic":
        h = grid.nodes**2
    else:
        h = export.read_scalar_csv(cfg.energy_path, grid)
    return EnergyDensity(grid, h, cfg.energy_E)


def constrain(grid: Grid, values, h: EnergyDensity | None, floor: float) -> DensityField:
    """Project raw values onto the active constraint set."""
    if h is None:
        return project_mass(ScalarField(grid, values), floor=floor)
    base = project_mass(ScalarField(grid, values), floor=floor)
    return project_mass_energy(grid, base.values, h, floor)


def build_initial(cfg: ScenarioConfig, grid: Grid, h: EnergyDensity | None) -> DensityField:
    if cfg.initial == "custom-csv":
        p = export.read_density_csv(cfg.initial_path, grid, cfg.floor)
        if h is None:
            return p
        return constrain(grid, p.values, h, cfg.floor)
    if cfg.initial == "uniform":
        values = np.ones(grid.n)
    elif cfg.initial == "perturbed-sine":
        a, b = grid.bounds
        values = 1.0 + cfg.amplitude * np.sin(2 * np.pi * (grid.nodes - a) / (b - a))
    else:
        base = uniform_limit(grid, cfg.floor) if h is None else gibbs_solve(grid, h, cfg.floor).density
        values = base.values * (1.0 + cfg.noise * smooth_noise(grid, cfg.seed))
    return constrain(grid, values, h, cfg.floor)


def make_params(cfg: ScenarioConfig) -> SgParams:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StabilityWarning)
        params = SgParams(
            gamma=cfg.gamma, dt=cfg.dt, floor=cfg.floor, max_steps=cfg.max_steps, stop_tol=cfg.stop_tol
        )
    for w in caught:
        msg = str(w.message)
        log.warning("configuration warning: %s", msg)
        cfg.warnings.append(msg)
    return params


def simulate(cfg: ScenarioConfig) -> tuple[Trajectory, DensityField]:
    """Run the configured scenario in memory; returns the trajectory and its limit."""
    cfg.validate()
    grid = build_uniform_grid(cfg.a, cfg.b, cfg.n)
    h = build_energy(cfg, grid)
    params = make_params(cfg)
    limit = uniform_limit(grid, cfg.floor) if h is None else gibbs_solve(grid, h, cfg.floor).density
    p0 = build_initial(cfg, grid, h)
    traj = run(p0, cfg.mode, h, params, limit=limit, stride=cfg.output_stride)
    return traj, limit


def output_dir(cfg: ScenarioConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)


def write_artifacts(out: Path, traj: Trajectory, limit: DensityField, cfg: ScenarioConfig) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    export.write_trajectory_csv(out / "trajectory.csv", traj.records)
    export.write_density_csv(out / "final_density.csv", traj.final)
    export.write_density_csv(out / "limit_density.csv", limit)
    with open(out / "snapshots.csv", "w", newline="") as f:
        f.write("step,t,r,p\n")
        for k, t, p in zip(traj.state_steps, traj.times, traj.states):
            for r, v in zip(p.grid.nodes, p.values):
                f.write(f"{k},{t!r},{float(r)!r},{float(v)!r}\n")
    final_dist = float(np.max(np.abs(traj.final.values - limit.values)))
    summary = {
        "converged": traj.converged,
        "steps": traj.steps,
        "final_entropy": differential_entropy(traj.final),
        "limit_entropy": differential_entropy(limit),
        "final_dist_linf": final_dist,
        "final_rhs_inf": traj.final_rhs_inf,
        "mode": cfg.mode,
        "warnings": list(cfg.warnings),
    }
    export.write_json(out / "summary.json", summary)
    return summary


def run_scenario(cfg: ScenarioConfig, out: Path | None = None) -> tuple[int, dict]:
    """Run and write all artifacts. Returns ``(exit_status, summary)``.

    Non-convergence is reported in the summary with exit status 0; config
    errors give status 2 and runtime errors status 1, each with a code in
    ``summary.json``.
    """
    out = Path(out) if out is not None else output_dir(cfg)
    try:
        traj, limit = simulate(cfg)
    except EntropyFlowError as exc:
        status = 2 if isinstance(exc, ConfigInvalid) else 1
        summary = {"converged": False, "error": {"code": exc.code, "message": str(exc)}}
        out.mkdir(parents=True, exist_ok=True)
        export.write_json(out / "summary.json", summary)
        return status, summary
    except (OSError, ValueError) as exc:
        summary = {"converged": False, "error": {"code": "config-invalid", "message": str(exc)}}
        out.mkdir(parents=True, exist_ok=True)
        export.write_json(out / "summary.json", summary)
        return 2, summary
    return 0, write_artifacts(out, traj, limit, cfg)
