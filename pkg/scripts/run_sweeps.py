"""Run the refinement sweeps of the three scenarios and tabulate max D.

    python scripts/run_sweeps.py                       # every plan in scripts/plans
    python scripts/run_sweeps.py square_scaled --s 2 3 # one plan, chosen grids

Each run writes ``<out>/<scenario>_s<s>_<mode>.csv`` with the 21 sampled
``D(t_k)`` and every plan writes ``<out>/summary.csv``.  Runtimes grow like
``s^4``: s=2 takes minutes, s=6 hours.
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from crystalspiral import experiments as ex

PLANS = Path(__file__).parent / "plans"

# thresholds quoted for each plan, checked over the listed s values
THRESHOLDS = {
    "square_fixed": (0.04, None),
    "square_scaled": (0.025, None),
    "diagonal_fixed": (0.04, 4),
    "diagonal_scaled": (0.05, None),
    "triangle_fixed": (0.04, None),
    "triangle_scaled": (0.05, 4),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("plans", nargs="*", default=sorted(p.stem for p in PLANS.glob("*.json")))
    ap.add_argument("--s", type=int, nargs="+", help="override the s values of every plan")
    ap.add_argument("--out", help="override the output root")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    print(f"{'plan':<18} {'s':>2} {'rho':>12} {'eps':>8} {'max D':>9} {'bound':>6}  status")
    for name in args.plans:
        plan = ex.SweepPlan.from_json(PLANS / f"{name}.json")
        if args.s:
            plan = replace(plan, s_values=args.s)
        if args.out:
            plan = replace(plan, out=str(Path(args.out) / name))
        if args.workers:
            plan = replace(plan, workers=args.workers)
        bound, s_min = THRESHOLDS.get(name, (None, None))
        for res in ex.sweep(plan):
            checked = bound is not None and (s_min is None or res.s >= s_min)
            verdict = ("" if not checked or not res.ok
                       else "below" if res.max_d < bound else "ABOVE")
            status = "ok" if res.ok else res.error
            print(f"{name:<18} {res.s:>2} {res.rho:>12.10g} {res.eps:>8.4g} {res.max_d:>9.5f} "
                  f"{bound if checked else '':>6}  {status} {verdict}")


if __name__ == "__main__":
    main()
