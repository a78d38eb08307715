"""Growth of n_T on the flat torus and on the wedge of two circles.

    python3 scripts/entropy_growth.py --torus-T 200 --wedge-T 12
"""

import argparse
import math

from geoblock.entropy import graph_series, mane_estimate, torus_series
from geoblock.graphs import QuotientGraph
from geoblock.torus import TorusSpace


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--torus-T", type=int, default=200)
    p.add_argument("--wedge-T", type=int, default=12)
    args = p.parse_args(argv)
    U = TorusSpace.unit(2)
    o = U.point((0, 0))
    flat = mane_estimate(torus_series(U, o, o, args.torus_T, 1))
    print(f"torus  slope {flat.estimate:.4f}  log(n_T)/T at T={args.torus_T}: {flat.ratio:.4f}")
    W = QuotientGraph.wedge()
    v = W.point(0)
    s = graph_series(W, v, v, range(1, args.wedge_T + 1), inj=0.5)
    est = mane_estimate(s)
    print(f"wedge  slope {est.estimate:.4f}  spectral log rho {math.log(W.growth_oracle()):.4f}")
    for T, n, m in zip(s.horizons, s.n, s.m):
        print(f"  T = {T:4.0f}  n_T = {n:8d}  m_T = {m}")


if __name__ == "__main__":
    main()
