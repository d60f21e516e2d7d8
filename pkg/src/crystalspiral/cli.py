"""Command-line entry point: ``crystalspiral <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 numeric failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as ex
from .levelset import LevelSetSolver, extract_contour
from .spiral_ode import DiscreteSpiral, SpiralError
from .wulff import AssumptionError, dual, load_spec, validate_sectors

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("crystalspiral")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be ≥ 1")
        return v
    return conv


def _positive_float(name, allow_zero=False):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}")
        if v < 0 or (v == 0 and not allow_zero) or not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"{name} must be {'≥' if allow_zero else '>'} 0")
        return v
    return conv


def _rho_mode(text):
    try:
        return ex.RhoMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _rho_arg(text):
    if text.startswith(("scaled:", "fixed:")):
        return _rho_mode(text)
    return ex.RhoMode("fixed", _positive_float("rho")(text))


def _vectors(text):
    try:
        vecs = [tuple(float(c) for c in item.split(",")) for item in text.split(";") if item]
    except ValueError:
        raise argparse.ArgumentTypeError(f"vectors must look like 'x,y;x,y;...', got {text!r}")
    if len(vecs) < 3 or any(len(v) != 2 for v in vecs):
        raise argparse.ArgumentTypeError("need at least three 2-vectors")
    return vecs


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    verbosity: int = 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crystalspiral", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_arg(sp, required=True):
        sp.add_argument("--scenario", required=required,
                        help="preset name (square, diagonal, triangle) or JSON config path")

    sp = sub.add_parser("run-ode", help="discrete facet model only")
    scenario_arg(sp)
    sp.add_argument("--tmax", type=_positive_float("tmax", allow_zero=True))
    sp.add_argument("--dt", type=_positive_float("dt"), default=1e-6)
    sp.add_argument("--samples", type=_positive_int("samples"), default=21)
    sp.add_argument("--out", required=True, help="CSV path for (t, k, d_1..d_k)")

    sp = sub.add_parser("run-levelset", help="level-set model only")
    scenario_arg(sp)
    sp.add_argument("--s", type=_positive_int("s"), required=True)
    sp.add_argument("--rho", type=_rho_arg, default=ex.RhoMode("fixed", 0.02 - 1e-8))
    sp.add_argument("--eps", type=_positive_float("eps"))
    sp.add_argument("--tmax", type=_positive_float("tmax", allow_zero=True))
    sp.add_argument("--samples", type=_positive_int("samples"), default=2)
    sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("compare", help="paired run and D(t) series")
    scenario_arg(sp)
    sp.add_argument("--s", type=_positive_int("s"), required=True)
    sp.add_argument("--rho-mode", type=_rho_mode, default=ex.RhoMode("fixed", 0.02 - 1e-8))
    sp.add_argument("--eps", type=_positive_float("eps"))
    sp.add_argument("--out", default="results")

    sp = sub.add_parser("sweep", help="run a JSON sweep plan")
    sp.add_argument("--plan", required=True)

    for name, helptext in (("dual", "print the energy-density vectors"),
                           ("validate", "check the sector assumptions")):
        sp = sub.add_parser(name, help=helptext)
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--preset")
        g.add_argument("--config", help="JSON file with 'facets' or 'preset'")
        g.add_argument("--vectors", type=_vectors, help="'x,y;x,y;...'")
    return p


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose")}
    return RunConfig(ns.command, opts, ns.verbose)


# -- subcommands ----------------------------------------------------------------

def _cmd_run_ode(o):
    sc = ex.load_scenario(o["scenario"])
    tmax = sc.t_end if o["tmax"] is None else o["tmax"]
    times = ex.sample_times(tmax, o["samples"]) if tmax > 0 else np.array([0.0])
    traj = DiscreteSpiral(sc.shape, sc.params, o["dt"]).simulate(tmax, times)
    kmax = max(st.k for st, _ in traj)
    rows = [[st.t, st.k, *st.d.tolist(), *[""] * (kmax - st.k)] for st, _ in traj]
    out = Path(o["out"])
    ex.write_csv_atomic(out, ["t", "k", *[f"d_{j}" for j in range(1, kmax + 1)]], rows)
    poly_rows = [[poly.t, j, float(x), float(y)]
                 for _, poly in traj for j, (x, y) in zip(range(poly.points.shape[0] - 1, -1, -1),
                                                          poly.points)]
    ex.write_csv_atomic(out.with_name(out.stem + "_polyline.csv"), ["t", "j", "x", "y"], poly_rows)
    print(f"{len(rows)} samples, final k={traj[-1][0].k} -> {out}")


def _cmd_run_levelset(o):
    sc = ex.load_scenario(o["scenario"])
    tmax = sc.t_end if o["tmax"] is None else o["tmax"]
    cfg = ex.levelset_config(sc, o["s"], o["rho"].radius(o["s"]), o["eps"])
    solver = LevelSetSolver(cfg)
    times = ex.sample_times(tmax, o["samples"]) if tmax > 0 else np.array([0.0])
    snaps = solver.solve(tmax, times)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    x, y = solver.grid.coords
    n = cfg.n_half
    mask = solver.grid.mask
    ii, jj = np.nonzero(mask)
    last = snaps[-1]
    ex.write_csv_atomic(out / f"{sc.name}_s{cfg.s}_field.csv", ["i", "j", "x", "y", "u"],
                        zip((ii - n).tolist(), (jj - n).tolist(), x[mask].tolist(),
                            y[mask].tolist(), last.values[mask].tolist()))
    contour_rows = [[snap.t, li, float(px), float(py)]
                    for snap in snaps
                    for li, line in enumerate(extract_contour(snap, solver.grid))
                    for px, py in line]
    ex.write_csv_atomic(out / f"{sc.name}_s{cfg.s}_contour.csv", ["t", "line", "x", "y"],
                        contour_rows)
    tmp = out / f".{sc.name}_s{cfg.s}_snapshots.tmp.npz"
    np.savez_compressed(tmp, t=np.array([s_.t for s_ in snaps]),
                        u=np.array([s_.values for s_ in snaps]))
    tmp.replace(out / f"{sc.name}_s{cfg.s}_snapshots.npz")
    print(f"{len(snaps)} snapshots on a {cfg.size}^2 grid (eps={cfg.eps:g}) -> {out}")


def _cmd_compare(o):
    sc = ex.load_scenario(o["scenario"])
    res = ex.run_comparison(sc, o["s"], o["rho_mode"], o["eps"])
    if res.rows:
        ex.write_result(o["out"], res)
    ex.write_csv_atomic(Path(o["out"]) / f"{sc.name}_s{res.s}_{res.rho_mode.replace(':', '')}"
                        "_summary.csv", ex.SUMMARY_HEADER, [ex.summary_row(res)])
    for t, d in res.rows:
        print(f"t={t:.4f}  D={d:.6f}")
    if not res.ok:
        raise NumericFailure(res.error)
    print(f"max D = {res.max_d:.6f}  (rho={res.rho:.10g}, eps={res.eps:g}, {res.runtime_s:.1f}s)")


def _cmd_sweep(o):
    plan = ex.SweepPlan.from_json(o["plan"])
    results = ex.sweep(plan)
    for r in results:
        print(*ex.summary_row(r), sep="\t")
    failed = [r for r in results if not r.ok]
    if failed:
        raise NumericFailure(f"{len(failed)} of {len(results)} runs failed")


def _vector_source(o):
    if o.get("vectors") is not None:
        return np.array(o["vectors"], dtype=float)
    spec = load_spec(o["preset"] if o.get("preset") else Path(o["config"]))
    return spec


def _cmd_dual(o):
    src = _vector_source(o)
    from .wulff import SupportSpec
    spec = SupportSpec.from_vectors(src) if isinstance(src, np.ndarray) else src
    dens = dual(spec)
    for j, (v, r, th) in enumerate(zip(dens.vectors, dens.r, dens.theta)):
        print(f"n_{j} = ({v[0]: .15g}, {v[1]: .15g})   r={r:.15g} theta={th:.15g}")


def _cmd_validate(o):
    src = _vector_source(o)
    vecs = src if isinstance(src, np.ndarray) else src.vectors
    report = validate_sectors(vecs)
    for j, (ne, nb) in enumerate(zip(report.nonempty, report.neighbour_form)):
        print(f"P_{j}: {'nonempty' if ne else 'EMPTY'}, "
              f"{'equals' if nb else 'differs from'} neighbour intersection")
    if not report.ok:
        raise NumericFailure(f"sector check failed; empty sectors: {report.empty_sectors}")
    print("ok")


class NumericFailure(Exception):
    pass


COMMANDS = {
    "run-ode": _cmd_run_ode,
    "run-levelset": _cmd_run_levelset,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "dual": _cmd_dual,
    "validate": _cmd_validate,
}


def dispatch(cfg: RunConfig) -> int:
    logging.basicConfig(level=logging.WARNING - 10 * cfg.verbosity,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[cfg.command](cfg.options)
    except (UsageError, FileNotFoundError) as exc:
        tag = "usage" if isinstance(exc, UsageError) else "io"
        print(f"{cfg.command} [{tag}]: {exc}", file=sys.stderr)
        return EXIT_USAGE if tag == "usage" else EXIT_IO
    except OSError as exc:
        print(f"{cfg.command} [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericFailure, SpiralError, AssumptionError, ArithmeticError, RuntimeError,
            ValueError) as exc:
        print(f"{cfg.command} [{type(exc).__module__.rsplit('.', 1)[-1]}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
