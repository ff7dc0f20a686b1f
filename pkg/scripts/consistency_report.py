"""Print the cross-check report between first-principles solves and the published closed forms."""

from __future__ import annotations

import argparse
import json

from speedmeter.freqsolve import FrequencyGrid
from speedmeter.scenarios import consistency_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=400)
    args = ap.parse_args()

    rep = consistency_report(args.gamma, FrequencyGrid.log(1e-3, 10.0, args.points))
    for r in rep.records:
        print(f"{r.name}: {r.verdict} (max rel dev {r.max_rel_deviation:.3e} at omega={r.location_omega:.4g}, "
              f"tol {r.tolerance:g})")
        print(f"    {r.route_a}  vs  {r.route_b}")
        for key, value in r.details.items():
            print(f"    {key}: {json.dumps(value)}")


if __name__ == "__main__":
    main()
