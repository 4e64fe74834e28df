"""Convergence of the time-changed fOU to the time-changed OU as H decreases to 1/2.

Prints one row per H with every diagnostic of the convergence module and the
Fokker-Planck residual of the H = 1/2 identity, and writes the table as JSON.

    python scripts/h_convergence.py --track 0.7,0.6,0.55,0.52,0.51 --out h_track.json
"""
import argparse
import json
import time

from tcfou import BernsteinFunction, FouModel, TcfouModel
from tcfou.convergence import (covariance_lipschitz, sup_norm_density, sup_norm_moments,
                               vprime_envelope, vprime_small_t)
from tcfou.fpe import mild_residual

COLUMNS = ("moments_n2", "density_tc", "density_parent", "vprime_env", "vprime_small",
           "cov_lipschitz", "residual")


def row(m, H):
    return {
        "moments_n2": sup_norm_moments(2, H, m.fou.theta, m.fou.sigma),
        "density_tc": sup_norm_density(m, H),
        "density_parent": sup_norm_density(m, H, parent=True),
        "vprime_env": vprime_envelope(H, m.fou.theta),
        "vprime_small": vprime_small_t(H, m.fou.theta),
        "cov_lipschitz": covariance_lipschitz(m.fou.with_H(H)),
        "residual": abs(mild_residual(m.with_H(H), 1.0, 1.0, weight_H=0.5).relative_residual),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--track", default="0.7,0.6,0.55,0.52,0.51")
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--out")
    args = ap.parse_args()
    m = TcfouModel(FouModel(0.7, args.theta), BernsteinFunction.stable(args.alpha))
    track = [float(h) for h in args.track.split(",")]
    print("H     " + "  ".join(f"{c:>14s}" for c in COLUMNS))
    rows = []
    for H in track:
        t0 = time.perf_counter()
        r = row(m, H)
        rows.append({"H": H, **r})
        print(f"{H:<5g} " + "  ".join(f"{r[c]:14.6e}" for c in COLUMNS)
              + f"   ({time.perf_counter() - t0:.1f}s)")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"alpha": args.alpha, "theta": args.theta, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
