"""Speed meter vs position meter spectra on the default grid, both routes, as CSV."""

from __future__ import annotations

import argparse
import csv
import sys

from speedmeter.cli import fmt
from speedmeter.freqsolve import FrequencyGrid
from speedmeter.scenarios import compare_meters


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=400)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    grid = FrequencyGrid.log(1e-3, 10.0, args.points)
    fp = compare_meters(args.gamma, grid)
    cl = compare_meters(args.gamma, grid, route="closedForm")
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["omega", "S_SM", "S_PM", "S_SM_published", "S_PM_published", "verdict"])
    for k, omega in enumerate(fp.omegas):
        w.writerow([fmt(omega), fmt(fp.s_sm[k]), fmt(fp.s_pm[k]), fmt(cl.s_sm[k]), fmt(cl.s_pm[k]), fp.verdicts[k]])
    if out is not sys.stdout:
        out.close()
    crossing = next((o for o, b in zip(fp.omegas, fp.sm_better) if not b), None)
    print(f"gamma={args.gamma}: speed meter better up to omega ~ {crossing:.4g}", file=sys.stderr)


if __name__ == "__main__":
    main()
