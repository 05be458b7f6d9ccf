"""Experiment presets, the simulation loop, diagnostics and file output."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .ecm import ic_random, ic_stripes
from .grid import Grid2D, NonFiniteError, SimState, field_stats, integrate
from .imex import StepControls, StepStats, imex_step, select_dt
from .kinetics import ModelConfig, ph_level, wellposedness_margin
from .linsolve import SolverError

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "SimulationConfig",
    "DiagnosticsRecord",
    "RunSummary",
    "preset",
    "initial_state",
    "run",
    "write_snapshot",
    "write_manifest",
    "config_from_manifest",
]

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5", "exp6", "custom")
DEFAULT_SNAPSHOTS = (0.0, 3.3, 6.7, 10.0)
BOUND_SLACK = 1e-6


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    experiment: str = "exp1"
    ic: str = "stripes"
    grid_n: int = 128
    t_end: float = 10.0
    snapshot_times: list = field(default_factory=lambda: list(DEFAULT_SNAPSHOTS))
    seed: int = 0
    controls: StepControls = field(default_factory=StepControls)
    model: ModelConfig = field(default_factory=ModelConfig)
    out_dir: str = "out"
    overrides: dict = field(default_factory=dict)
    diagnostics_every: int = 50
    solver_tol: float = 1e-10
    solver_max_iter: int = 500
    plot: bool = False

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.ic not in ("stripes", "random"):
            raise ConfigError(f"unknown initial condition {self.ic!r}")
        if self.grid_n < 2:
            raise ConfigError("grid must have at least 2 cells per side")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end must be a finite non-negative number")
        times = list(self.snapshot_times)
        if times != sorted(times) or len(set(times)) != len(times):
            raise ConfigError("snapshot times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ConfigError(f"snapshot times must lie in [0, {self.t_end}]")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.diagnostics_every < 1:
            raise ConfigError("diagnostics interval must be positive")
        try:
            self.model.validate()
            StepControls(**asdict(self.controls))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snapshot_times"] = [float(t) for t in self.snapshot_times]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        d["controls"] = StepControls(**d["controls"])
        d["model"] = ModelConfig.from_dict(d["model"])
        return cls(**d)


def preset(experiment_id: str) -> SimulationConfig:
    """Configuration of one of the published experiments."""
    if experiment_id not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment_id!r}; choose from {', '.join(EXPERIMENTS)}")
    model = ModelConfig()
    if experiment_id not in ("exp1", "custom"):
        model.rate_kind = "Dynamic"
    if experiment_id == "exp3":
        model.repellent_target = "Acidity"
        model.proliferation_kind = "AcidityDependent"
        model.delta = 0.2
        model.D_h = 0.07
        model.alpha_h = 0.55
        model.beta_h = 0.05
        model.mu0 = 0.1
    elif experiment_id == "exp4":
        model.diffusion_kind = "Degenerate"
    elif experiment_id == "exp5":
        model.remodeling_kind = "CellDriven"
        model.mu_v = 0.5
    elif experiment_id == "exp6":
        model.proliferation_kind = "Anoikis"
    model.validate()
    return SimulationConfig(experiment=experiment_id, model=model)


def initial_state(config: SimulationConfig) -> SimState:
    grid = Grid2D.square(config.grid_n)
    if config.ic == "stripes":
        state = ic_stripes(grid)
    else:
        state = ic_random(grid, config.seed)
    if config.model.has_acidity:
        # acidity starts proportional to the proliferating cells
        state = state.replace(h=0.2 + state.p)
    return state


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    fields: dict
    invariant_bounds: Optional[dict] = None
    wellposedness_margin: Optional[float] = None
    dt: Optional[float] = None
    solver_iterations: int = 0


@dataclass
class RunSummary:
    snapshot_paths: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0
    global_min: float = math.inf
    global_min_at: Optional[dict] = None
    invariant_bounds: Optional[dict] = None
    abort: Optional[dict] = None
    manifest_path: Optional[str] = None
    figure_paths: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.abort is None


def _invariant_bounds(state: SimState, cfg: ModelConfig) -> Optional[dict]:
    """A priori bounds for ``max p``, ``max v`` and the mass of ``m`` (constant switch rates only)."""
    if cfg.rate_kind != "Constant" or cfg.mu <= 0 or cfg.gamma0 <= 0:
        return None
    A = max(float(np.max(state.p)), 1.0 - cfg.lambda0 / cfg.mu, cfg.gamma0 / cfg.mu)
    L = max(float(np.max(state.v)), 1.0)
    B = max(integrate(state.grid, state.m), cfg.lambda0 * A * state.grid.area / cfg.gamma0)
    return {"A": A, "L": L, "B": B, "violations": {"p": 0, "v": 0, "m_mass": 0}}


def _check_bounds(state: SimState, bounds: dict) -> dict:
    flags = {
        "p": float(np.max(state.p)) > bounds["A"] + BOUND_SLACK,
        "v": float(np.max(state.v)) > bounds["L"] + BOUND_SLACK,
        "m_mass": integrate(state.grid, state.m) > bounds["B"] + BOUND_SLACK,
    }
    for k, bad in flags.items():
        bounds["violations"][k] += int(bad)
    return flags


def _record(state: SimState, cfg: ModelConfig, step: int, dt, iterations, bounds) -> DiagnosticsRecord:
    stats = {}
    for name, f in state.fields().items():
        lo, hi, mass = field_stats(state.grid, f)
        stats[name] = {"min": lo, "max": hi, "mass": mass}
    bounds_rec = None
    if bounds is not None:
        bounds_rec = {
            "A": bounds["A"], "L": bounds["L"], "B": bounds["B"],
            "p_ok": stats["p"]["max"] <= bounds["A"] + BOUND_SLACK,
            "v_ok": stats["v"]["max"] <= bounds["L"] + BOUND_SLACK,
            "m_mass_ok": stats["m"]["mass"] <= bounds["B"] + BOUND_SLACK,
        }
    margin = None
    if cfg.model_family == "SimplifiedAnalysis" and cfg.rate_kind == "Constant":
        margin = wellposedness_margin(cfg, state)
    return DiagnosticsRecord(state.t, step, stats, bounds_rec, margin, dt, iterations)


def _format_rows(a: np.ndarray) -> str:
    return "".join(",".join("%.17g" % x for x in row) + "\n" for row in a)


def snapshot_fields(state: SimState, cfg: Optional[ModelConfig] = None) -> dict[str, np.ndarray]:
    out = state.fields()
    if state.h is not None:
        exponent = cfg.h_T_exponent if cfg is not None else 6.4
        h = state.h
        out["ph"] = np.where(h > 0, ph_level(np.where(h > 0, h, 1.0), exponent), np.nan)
    return out


def write_snapshot(state: SimState, index: int, directory, cfg: Optional[ModelConfig] = None) -> list[str]:
    """Write ``<field>_<index>.csv`` for every field; rows are y-ascending, no header."""
    directory = Path(directory)
    paths = []
    for name, values in snapshot_fields(state, cfg).items():
        path = directory / f"{name}_{index}.csv"
        path.write_text(_format_rows(np.asarray(values)))
        paths.append(str(path))
    return paths


def read_snapshot(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_manifest(config: SimulationConfig, summary: RunSummary, directory) -> str:
    grid = Grid2D.square(config.grid_n)
    snaps = []
    for k, (t, paths) in enumerate(zip(summary.snapshot_times, summary.snapshot_paths)):
        snaps.append({"index": k, "t": t, "files": [Path(p).name for p in paths]})
    manifest = {
        "format_version": FORMAT_VERSION,
        "grid": {"nx": grid.nx, "ny": grid.ny, "xmin": grid.xmin, "xmax": grid.xmax,
                 "ymin": grid.ymin, "ymax": grid.ymax, "h": grid.h},
        "config": config.to_dict(),
        "parameters": config.model.to_dict(),
        "seed": config.seed,
        "snapshots": snaps,
        "steps": summary.steps,
        "wall_time": summary.wall_time,
        "global_min": summary.global_min,
        "global_min_at": summary.global_min_at,
        "invariant_bounds": summary.invariant_bounds,
        "diagnostics": [asdict(r) for r in summary.diagnostics],
        "figures": [Path(p).name for p in summary.figure_paths],
        "abort": summary.abort,
    }
    path = Path(directory) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, allow_nan=True))
    return str(path)


def config_from_manifest(manifest: dict) -> SimulationConfig:
    return SimulationConfig.from_dict(manifest["config"])


def run(config: SimulationConfig, keep_states: bool = True) -> RunSummary:
    """Integrate from t=0 to ``t_end``, landing exactly on every snapshot time.

    Numerical failures (solver breakdown, non-finite values) end the run with
    ``summary.abort`` filled in; the manifest is written either way. I/O errors
    propagate as ``OSError``.
    """
    config.validate()
    cfg = config.model
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    state = initial_state(config)
    summary = RunSummary()
    bounds = _invariant_bounds(state, cfg)
    summary.invariant_bounds = bounds

    def track_min(st: SimState):
        name, f = min(st.fields().items(), key=lambda kv: float(np.min(kv[1])))
        lo = float(np.min(f))
        if lo < summary.global_min:
            j, i = np.unravel_index(int(np.argmin(f)), f.shape)
            summary.global_min = lo
            summary.global_min_at = {"step": summary.steps, "t": st.t, "field": name,
                                     "cell": [int(j), int(i)]}

    track_min(state)

    def snapshot(st: SimState, dt, iters):
        idx = len(summary.snapshot_paths)
        summary.snapshot_paths.append(write_snapshot(st, idx, out, cfg))
        summary.snapshot_times.append(st.t)
        if keep_states:
            summary.snapshots.append(st.copy())
        summary.diagnostics.append(_record(st, cfg, summary.steps, dt, iters, bounds))
        if config.plot:
            from .plotting import plot_snapshot

            summary.figure_paths.append(plot_snapshot(st, out / f"snapshot_{idx}.png", cfg))

    if bounds is not None:
        _check_bounds(state, bounds)
    targets = [float(t) for t in config.snapshot_times]
    if targets and targets[0] == 0.0:
        snapshot(state, None, 0)
        targets = targets[1:]
    # stop at t_end even when it is not a snapshot time
    stops = [(t, True) for t in targets]
    if state.t < config.t_end and (not targets or targets[-1] < config.t_end):
        stops.append((config.t_end, False))

    stats = StepStats()
    dt = None
    try:
        for target, is_snapshot in stops:
            while state.t < target:
                dt = select_dt(state, cfg, config.controls)
                landing = state.t + dt * (1.0 + 1e-9) >= target
                if landing:
                    dt = target - state.t
                before = stats.solver_iterations
                try:
                    state = imex_step(state, dt, cfg, config.solver_tol, config.solver_max_iter, stats)
                except NonFiniteError as exc:
                    raise NonFiniteError(f"step {summary.steps + 1}: {exc}") from exc
                summary.steps += 1
                if landing:
                    state.t = target
                iters = stats.solver_iterations - before
                track_min(state)
                if bounds is not None:
                    _check_bounds(state, bounds)
                if summary.steps % config.diagnostics_every == 0 and not landing:
                    summary.diagnostics.append(_record(state, cfg, summary.steps, dt, iters, bounds))
            if is_snapshot:
                snapshot(state, dt, stats.solver_iterations)
    except (SolverError, NonFiniteError) as exc:
        logger.error("run aborted at step %d (t=%.6g): %s", summary.steps + 1, state.t, exc)
        summary.abort = {"step": summary.steps + 1, "t": state.t, "reason": str(exc)}

    summary.wall_time = time.perf_counter() - started
    summary.manifest_path = write_manifest(config, summary, out)
    logger.info("%s: %d steps in %.1f s, min value %.3g", config.experiment, summary.steps,
                summary.wall_time, summary.global_min)
    return summary
