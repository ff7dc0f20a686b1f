"""DC plateau of the filtered speed-meter readout versus input squeezing on each port."""

from __future__ import annotations

import argparse

import numpy as np

from speedmeter.freqsolve import FrequencyGrid
from speedmeter.scenarios import ScenarioConfig, run_speed_meter
from speedmeter.spectra import NoiseModel, Squeezed, canonical_plan


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--omega", type=float, default=1e-3)
    args = ap.parse_args()

    grid = FrequencyGrid([args.omega, 2 * args.omega])
    print(f"{'r':>5} " + " ".join(f"{p + ' ' + q:>12}" for p in "abc" for q in ("amp", "phase")))
    for r in np.linspace(0.0, 1.5, 7):
        row = []
        for port in "abc":
            for theta in (0.0, np.pi / 2):
                noise = NoiseModel({port: Squeezed(r, theta)})
                cfg = ScenarioConfig(args.gamma, grid, noise, canonical_plan("wiener"))
                row.append(run_speed_meter(cfg).total[0])
        print(f"{r:5.2f} " + " ".join(f"{v:12.5f}" for v in row))
    print("'amp'/'phase' name the squeezed quadrature of the listed input port")


if __name__ == "__main__":
    main()
