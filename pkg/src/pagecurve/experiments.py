"""Running configured experiments and writing CSV files plus a manifest."""

from __future__ import annotations

import csv
import itertools
import json
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_value
from .gaussian_qbm import (OscillatorSpec, evolve_trajectory, ground_state,
                           steady_covariance, gaussian_entropy, wave_packet)
from .heom import QubitSpec, convergence_check, solve
from .observables import (EntropyCurve, gibbs_state, page_time,
                          von_neumann_entropy)
from .spectral import BathSpec

__all__ = ["RunResult", "run_experiment", "expand_sweep", "run_many",
           "write_manifest", "MANIFEST_NAME"]

MANIFEST_NAME = "manifest.json"

QBM_COLUMNS = ("t", "S", "sxx", "sxp", "spp", "fidelity_ground")
SPIN_BOSON_COLUMNS = ("t", "S", "P1", "rho01_abs")


@dataclass
class RunResult:
    name: str
    config: dict
    csv: str | None
    ok: bool
    converged: bool | None = None
    summary: dict = field(default_factory=dict)
    error: str | None = None

    def as_dict(self) -> dict:
        return {"name": self.name, "csv": self.csv, "ok": self.ok,
                "converged": self.converged, "config": self.config,
                "summary": self.summary, "error": self.error}


def _write_csv(path: Path, columns, rows: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([format(float(v), ".17g") for v in r])


def _page_summary(report):
    return {"t_page": report.t_page, "s_max": report.s_max,
            "page_time_resolved": report.resolved,
            "population_crossing_time": report.crossing_time}


def _run_qbm(cfg: ExperimentConfig, out: Path):
    bath = BathSpec(cfg.gamma, cfg.cutoff, cfg.temperature)
    spec = OscillatorSpec(cfg.omega0, bath)
    state0 = (ground_state(cfg.omega0) if cfg.initial == "ground"
              else wave_packet(cfg.delta))
    times = cfg.time_grid()
    traj = evolve_trajectory(spec, state0, times, base=cfg.base)
    rows = np.column_stack([times, traj.entropy, traj.sxx, traj.sxp,
                            traj.spp, traj.fidelity_ground])
    path = out / f"{cfg.name}.csv"
    _write_csv(path, QBM_COLUMNS, rows)
    curve = EntropyCurve(times, traj.entropy, cfg.base)
    summary = _page_summary(page_time(curve))
    summary.update({
        "s_final": float(traj.entropy[-1]),
        "min_det_minus_quarter": float(traj.det.min() - 0.25),
        "min_fidelity_ground": float(traj.fidelity_ground.min()),
    })
    converged = None
    if cfg.gamma > 0:
        s_inf = gaussian_entropy(steady_covariance(spec), cfg.base)
        gap = abs(traj.entropy[-1] - s_inf)
        summary["s_steady"] = s_inf
        summary["asymptote_gap"] = float(gap)
        # plateau reached if the last sample agrees with the steady state
        converged = bool(gap < 1e-5)
    return path, summary, converged


def _run_spin_boson(cfg: ExperimentConfig, out: Path):
    bath = BathSpec(cfg.gamma, cfg.cutoff, cfg.temperature)
    spec = QubitSpec(cfg.epsilon, bath)
    rho0 = np.diag([1.0, 0.0] if cfg.initial == "excited" else [0.0, 1.0])
    times = cfg.time_grid()
    traj = solve(spec, cfg.n_k, cfg.n_c, times, rho0, scaled=cfg.scaled,
                 terminator=cfg.terminator, rtol=cfg.rtol, atol=cfg.atol,
                 method=cfg.method)
    S = traj.entropy(cfg.base)
    P1 = traj.populations
    rows = np.column_stack([times, S, P1, traj.coherence])
    path = out / f"{cfg.name}.csv"
    _write_csv(path, SPIN_BOSON_COLUMNS, rows)
    report = page_time(EntropyCurve(times, S, cfg.base, two_level=True), P1)
    summary = _page_summary(report)
    summary.update({
        "s_final": float(S[-1]),
        "p1_final": float(P1[-1]),
        "s_gibbs": von_neumann_entropy(gibbs_state(spec), cfg.base),
        "max_coherence": float(traj.coherence.max()),
        "max_population_increment": float(np.diff(P1).max()),
        "solver": {k: v for k, v in traj.diagnostics.items()
                   if k != "wall_time_s"},
    })
    converged = None
    if cfg.check_convergence:
        rep = convergence_check(spec, traj, cfg.convergence_threshold)
        summary["convergence"] = rep.as_dict()
        converged = rep.converged
    return path, summary, converged


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> RunResult:
    """
    Run one configuration, write ``<name>.csv`` into ``out_dir`` and return
    the result record. Solver failures are captured in the record rather
    than raised.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    try:
        runner = _run_qbm if cfg.model == "qbm" else _run_spin_boson
        path, summary, converged = runner(cfg, out)
    except Exception as exc:  # reported per run, not fatal for sweeps
        return RunResult(cfg.name, cfg.as_dict(), None, False,
                         error=f"{type(exc).__name__}: {exc}\n"
                               + traceback.format_exc(limit=3))
    summary["wall_time_s"] = time.perf_counter() - started
    return RunResult(cfg.name, cfg.as_dict(), path.name, True, converged,
                     summary)


def expand_sweep(template: ExperimentConfig, vary: list[str]
                 ) -> list[ExperimentConfig]:
    """
    Cartesian product over ``key=v1,v2,...`` specifications. Any empty
    range makes the sweep empty.
    """
    axes = []
    for spec in vary:
        if "=" not in spec:
            raise ConfigError(f"--vary {spec!r} is not of the form key=v1,v2")
        key, raw = (s.strip() for s in spec.split("=", 1))
        if key not in template.as_dict():
            raise ConfigError(f"cannot vary unknown key {key!r}")
        values = [parse_value(v.strip()) for v in raw.split(",") if v.strip()]
        axes.append((key, values))
    if any(not values for _, values in axes):
        return []
    configs = []
    for combo in itertools.product(*(values for _, values in axes)):
        data = template.as_dict()
        label = [template.name]
        for (key, _), value in zip(axes, combo):
            data[key] = value
            label.append(f"{key}_{value}")
        data["name"] = "__".join(label)
        configs.append(ExperimentConfig.from_mapping(data))
    return configs


def _run_star(args):
    return run_experiment(*args)


def run_many(configs, out_dir, workers: int | None = None) -> list[RunResult]:
    """Independent runs, in a process pool when more than one is given."""
    if not configs:
        return []
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("run names must be unique within one output folder")
    if len(configs) == 1 or workers == 1:
        return [run_experiment(c, out_dir) for c in configs]
    workers = workers or min(len(configs), os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, [(c, out_dir) for c in configs]))


def write_manifest(results, out_dir, command: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "runs": [r.as_dict() for r in results],
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json))
    return path


def _json(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")
