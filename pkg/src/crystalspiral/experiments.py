"""Scenario presets and paired discrete / level-set runs.

A comparison samples both models at ``t_k = k T / 20`` and records
``D(t_k)``; a sweep repeats that over grid refinements and centre radii and
writes one CSV per run plus a summary.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .height import diff_series
from .levelset import LevelSetConfig, LevelSetSolver
from .spiral_ode import DiscreteSpiral, EvolutionParams
from .wulff import (EnergyDensity, SupportSpec, WulffShape, dual, load_spec,
                    normalization_check, wulff_shape_from_support)

log = logging.getLogger(__name__)

RHO_SHIFT = 1e-8
WORKERS_ENV = "CRYSTALSPIRAL_WORKERS"


@dataclass
class Scenario:
    name: str
    spec: SupportSpec
    density: EnergyDensity
    shape: WulffShape
    params: EvolutionParams
    t_end: float
    xi_kind: str = "sector"

    @property
    def u0(self) -> float:
        """Level-set constant whose zero set is the initial ray along ``T_0``."""
        return float(self.shape.phi[0] - math.pi / 2)

    def check(self) -> None:
        report = normalization_check(self.spec, self.shape)
        if not report.ok:
            raise ValueError(f"scenario {self.name}: gamma_o(N_j) != 1 at facets {report.failing}")


_PRESETS = {
    "square": dict(rho_c=0.02, t_end=1.0, xi_kind="square"),
    "diagonal": dict(rho_c=0.02, t_end=1.0, xi_kind="diagonal"),
    "triangle": dict(rho_c=0.01, t_end=0.8, xi_kind="sector"),
}


def preset(name: str) -> Scenario:
    if name not in _PRESETS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(_PRESETS)}")
    opts = _PRESETS[name]
    spec = load_spec(name)
    sc = Scenario(name, spec, dual(spec), wulff_shape_from_support(spec),
                  EvolutionParams(1.0, opts["rho_c"]), opts["t_end"], opts["xi_kind"])
    sc.check()
    return sc


def load_scenario(source: str | Path | dict) -> Scenario:
    """Preset name, or JSON with ``preset`` / ``facets`` plus optional overrides.

    Recognised overrides: ``name``, ``U``, ``rho_c``, ``T_end``, ``xi_kind``,
    ``beta`` (list, one per facet).
    """
    if isinstance(source, str) and source in _PRESETS:
        return preset(source)
    cfg = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    if "preset" in cfg:
        base = preset(cfg["preset"])
        spec, kind, params, t_end = base.spec, base.xi_kind, base.params, base.t_end
    else:
        spec = load_spec(cfg)
        kind, params, t_end = "sector", EvolutionParams(), 1.0
    params = EvolutionParams(float(cfg.get("U", params.U)), float(cfg.get("rho_c", params.rho_c)))
    shape = wulff_shape_from_support(spec, cfg.get("beta"))
    sc = Scenario(cfg.get("name", cfg.get("preset", "custom")), spec, dual(spec), shape, params,
                  float(cfg.get("T_end", t_end)), cfg.get("xi_kind", kind))
    sc.check()
    return sc


@dataclass(frozen=True)
class RhoMode:
    """``fixed:<rho>`` or ``scaled:<c>`` meaning ``rho = (c - 1e-8) dx``."""

    kind: str
    value: float

    @classmethod
    def parse(cls, text: str) -> "RhoMode":
        kind, _, val = text.partition(":")
        if kind not in ("fixed", "scaled") or not val:
            raise ValueError(f"rho mode must be fixed:<value> or scaled:<c>, got {text!r}")
        v = float(val)
        if not v > 0:
            raise ValueError(f"rho mode value must be positive, got {v}")
        return cls(kind, v)

    def radius(self, s: int) -> float:
        if self.kind == "fixed":
            return self.value
        return (self.value - RHO_SHIFT) * (0.02 / s)

    def __str__(self) -> str:
        return f"{self.kind}:{self.value:.12g}"


def sample_times(t_end: float, count: int = 21) -> np.ndarray:
    return np.array([k * t_end / (count - 1) for k in range(count)])


def levelset_config(sc: Scenario, s: int, rho: float, eps: float | None = None) -> LevelSetConfig:
    return LevelSetConfig(s, rho, sc.params, sc.density, sc.xi_kind, eps=eps, u0=sc.u0)


def discrete_run(sc: Scenario, times, dt: float = 1e-6):
    traj = DiscreteSpiral(sc.shape, sc.params, dt).simulate(float(times[-1]), times)
    half = 1.5
    for state, poly in traj:
        if np.abs(poly.points).max() >= half:
            raise RuntimeError(f"{sc.name}: discrete spiral leaves the box at t={state.t:.4g}")
    return traj


@dataclass
class ComparisonResult:
    scenario: str
    s: int
    rho_mode: str
    rho: float
    eps: float
    rows: list[tuple[float, float]]
    runtime_s: float
    error: str | None = None

    @property
    def max_d(self) -> float:
        return max((d for _, d in self.rows), default=float("nan"))

    @property
    def ok(self) -> bool:
        return self.error is None


def run_comparison(sc: Scenario, s: int, mode: RhoMode, eps: float | None = None,
                   samples: int = 21, ode_dt: float = 1e-6, ode_traj=None) -> ComparisonResult:
    """Paired run; any failure is captured in ``error`` with the rows done so far."""
    start = time.perf_counter()
    times = sample_times(sc.t_end, samples)
    rho = mode.radius(s)
    rows: list[tuple[float, float]] = []
    cfg_eps = float("nan")
    try:
        cfg = levelset_config(sc, s, rho, eps)
        cfg_eps = cfg.eps
        traj = ode_traj if ode_traj is not None else discrete_run(sc, times, ode_dt)
        solver = LevelSetSolver(cfg)
        snaps = solver.solve(sc.t_end, times)
        rows = diff_series(traj, snaps, sc.shape, solver.grid)
        err = None
    except Exception as exc:  # isolate per-run failures
        log.exception("run %s s=%d %s failed", sc.name, s, mode)
        err = f"{type(exc).__name__}: {exc}"
    return ComparisonResult(sc.name, s, str(mode), rho, cfg_eps, rows,
                            time.perf_counter() - start, err)


# -- output ---------------------------------------------------------------------

def write_csv_atomic(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def series_path(out_dir: Path, res: ComparisonResult) -> Path:
    mode = res.rho_mode.replace(":", "")
    return Path(out_dir) / f"{res.scenario}_s{res.s}_{mode}.csv"


SUMMARY_HEADER = ["scenario", "s", "rho_mode", "rho", "eps", "maxD", "runtime_s", "status"]


def summary_row(res: ComparisonResult) -> list:
    return [res.scenario, res.s, res.rho_mode, res.rho, res.eps, res.max_d,
            round(res.runtime_s, 3), "ok" if res.ok else f"failed: {res.error}"]


def write_result(out_dir: str | Path, res: ComparisonResult) -> Path:
    return write_csv_atomic(series_path(Path(out_dir), res), ["t", "D"], res.rows)


@dataclass
class SweepPlan:
    scenario: str | dict
    s_values: list[int]
    rho_modes: list[RhoMode]
    samples: int = 21
    eps: float | None = None
    out: str = "results"
    workers: int | None = None

    def __post_init__(self):
        if not self.s_values or any(int(s) < 1 for s in self.s_values):
            raise ValueError("s values must be integers >= 1")
        self.s_values = [int(s) for s in self.s_values]
        self.rho_modes = [m if isinstance(m, RhoMode) else RhoMode.parse(m) for m in self.rho_modes]

    @classmethod
    def from_json(cls, path: str | Path) -> "SweepPlan":
        cfg = json.loads(Path(path).read_text())
        return cls(cfg["scenario"], cfg["s"], cfg["rho_modes"], cfg.get("samples", 21),
                   cfg.get("eps"), cfg.get("out", "results"), cfg.get("workers"))


def _sweep_entry(args):
    scenario, s, mode, eps, samples = args
    return run_comparison(load_scenario(scenario), s, mode, eps, samples)


def sweep(plan: SweepPlan) -> list[ComparisonResult]:
    """Run every (s, rho mode) pair, write the series CSVs and ``summary.csv``."""
    jobs = [(plan.scenario, s, m, plan.eps, plan.samples)
            for s in plan.s_values for m in plan.rho_modes]
    workers = plan.workers or int(os.environ.get(WORKERS_ENV, os.cpu_count() or 1))
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        results = [_sweep_entry(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_entry, jobs))
    for res in results:
        if res.rows:
            write_result(plan.out, res)
    write_csv_atomic(Path(plan.out) / "summary.csv", SUMMARY_HEADER,
                     [summary_row(r) for r in results])
    return results
