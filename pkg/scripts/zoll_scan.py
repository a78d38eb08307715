"""Scan a Zoll sphere for pairs with three or more interior-disjoint light rays.

    python3 scripts/zoll_scan.py --eps 0.3 --grid 12 --out zoll_scan.json
"""

import argparse
import json
import math
import time

from geoblock.revolution import RevolutionMetric, scan_cross_blocking


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--limit", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    args = p.parse_args(argv)
    metric = RevolutionMetric.zoll(args.eps)
    t0 = time.perf_counter()
    res = scan_cross_blocking(metric, args.grid, 2 * math.pi, limit=args.limit, workers=args.workers)
    print(f"eps {args.eps}, grid {args.grid}: {len(res.reports)} violated pair(s) of "
          f"{res.candidates} screened, diameter {res.diameter:.6f}, {time.perf_counter() - t0:.1f} s")
    for r in res.reports:
        print(f"  x = ({r.x.r:.4f}, {r.x.phi:.4f})  y = ({r.y.r:.4f}, {r.y.phi:.4f})  "
              f"d = {r.distance:.4f}  m_T = {r.m_T}  disjoint = {r.lower_bound}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"eps": args.eps, "grid": args.grid, "diameter": res.diameter,
                       "candidates": res.candidates,
                       "reports": [r.to_json() for r in res.reports]}, fh, indent=1, sort_keys=True)


if __name__ == "__main__":
    main()
