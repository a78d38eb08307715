"""Run the acceptance criteria and write one JSON artifact per criterion.

    python3 scripts/run_acceptance.py --out artifacts --workers 1 --seed 0
    python3 scripts/run_acceptance.py --only 1 4 5
"""

import argparse
import sys
import time
from pathlib import Path

from geoblock import experiments as E


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="artifacts")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", type=int, nargs="*", help="criteria to run (10 needs all of 1-9)")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    todo = args.only or list(range(1, 11))
    results = {}
    for k in todo:
        t0 = time.perf_counter()
        if k == 10:
            first = {j: results.get(j) or E.CRITERIA[j](args.workers, args.seed) for j in E.CRITERIA}
            res = E.determinism(first, args.seed)
        else:
            res = E.CRITERIA[k](args.workers, args.seed)
        results[k] = res
        (out / f"criterion_{k:02d}_{res.name}.json").write_bytes(res.artifact_bytes())
        print(f"criterion {k:2d} {'PASS' if res.passed else 'FAIL'}  {res.summary}  "
              f"[{time.perf_counter() - t0:.1f} s]", flush=True)
    return 0 if all(r.passed for r in results.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
