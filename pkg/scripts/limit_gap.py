"""How fast the marginal of U_H(E(t)) approaches its Gaussian limit.

For each t the exact Kolmogorov distance between the mixture CDF and the
limit law is computed by quadrature, next to the asymptotic 1% critical
value for N samples. A KS test with N samples can only pass once the exact
distance is well below that value. Heavy-tailed stable time changes keep
mass of E(t) near 0 for a long time (P(E(t) < s) ~ s t^(-alpha)).

    python scripts/limit_gap.py --times 10,100,1000,10000 --n 100000
"""
import argparse
import math

import numpy as np
from scipy import stats

from tcfou import BernsteinFunction, FouModel, TcfouModel
from tcfou.fou import variance_limit
from tcfou.timechange import cdf_tc


def kolmogorov_gap(m, t, x):
    limit = stats.norm(scale=math.sqrt(variance_limit(m.fou))).cdf(x)
    return float(np.max(np.abs(cdf_tc(m, t, x) - limit)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--times", default="10,100,1000,10000")
    ap.add_argument("--hurst", type=float, default=0.7)
    ap.add_argument("--n", type=int, default=100_000, help="sample size of the KS test")
    args = ap.parse_args()
    crit = stats.kstwobign.ppf(0.99) / math.sqrt(args.n)
    x = np.linspace(-4, 4, 161)
    kinds = {"stable 0.5": BernsteinFunction.stable(0.5),
             "stable 0.8": BernsteinFunction.stable(0.8),
             "gamma(1,1)": BernsteinFunction.gamma()}
    print(f"1% critical value for N={args.n}: {crit:.5f}")
    print("t        " + "  ".join(f"{k:>12s}" for k in kinds))
    for t in (float(v) for v in args.times.split(",")):
        gaps = [kolmogorov_gap(TcfouModel(FouModel(args.hurst), f), t, x) for f in kinds.values()]
        print(f"{t:<8g} " + "  ".join(f"{g:12.5f}" for g in gaps))


if __name__ == "__main__":
    main()
