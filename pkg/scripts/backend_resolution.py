"""Resolution of the interpolated path backend.

Reports the variance lost by linear interpolation on the operational grid
(n_fine steps over the largest E value) and a Monte Carlo variance of
U_H(E(t)) for each n_fine, against the quadrature value.

    python scripts/backend_resolution.py --paths 20000
"""
import argparse
import math
import time

import numpy as np

from tcfou import BernsteinFunction, FouModel, Grid, RngStream, TcfouModel
from tcfou.timechange import (interpolation_deficit, moment_tc, sample_tcfou_batch,
                              sample_time_change)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--t", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    m = TcfouModel(FouModel(0.7), BernsteinFunction.stable(0.5))
    ref = moment_tc(m, 2, args.t)
    print(f"quadrature variance at t={args.t}: {ref:.6f}")
    print("n_fine   deficit(Delta)  deficit(Delta/2)  MC variance   z-score   seconds")
    grid = Grid(np.array([0.0, args.t]))
    # the backend spans each batch of 256 paths with one grid up to the batch's largest E
    rng = RngStream(args.seed)
    E = sample_time_change(m.phi, grid, args.paths, rng.child(0))[:, -1]
    horizon = float(np.median([E[i:i + 256].max() for i in range(0, E.size, 256)]))
    print(f"median operational horizon per batch: {horizon:.3f}")
    for k in (8, 10, 12, 14):
        n_fine = 2**k
        t0 = time.perf_counter()
        x = sample_tcfou_batch(m, grid, args.paths, rng, n_fine=n_fine)[:, -1]
        secs = time.perf_counter() - t0
        var = x.var(ddof=1)
        se = math.sqrt(np.var(x * x, ddof=1) / x.size)
        delta = horizon / n_fine
        d1 = interpolation_deficit(m.fou, 1.0, delta)
        d2 = interpolation_deficit(m.fou, 1.0, delta / 2)
        print(f"{n_fine:<8d} {d1:14.3e}  {d2:16.3e}  {var:11.6f}  {(var - ref) / se:8.2f}  "
              f"{secs:8.1f}")


if __name__ == "__main__":
    main()
