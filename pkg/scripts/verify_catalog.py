"""Run every tier on every catalog model and print a compact table.

    python3 scripts/verify_catalog.py --points 10 --seed 0
"""

import argparse
import sys
import time

from curvcert.models import catalog, sample_points
from curvcert.verify import FAIL, NOT_APPLICABLE, PASS, run_tier


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tier", default="all", choices=["A", "B", "C", "all"])
    ap.add_argument("--model", action="append", help="restrict to these models")
    args = ap.parse_args(argv)

    names = args.model or list(catalog())
    failed = 0
    print(f"{'model':<16}{'pass':>6}{'fail':>6}{'n/a':>6}{'worst':>12}{'sec':>8}")
    for name in names:
        m = catalog()[name].model
        t0 = time.perf_counter()
        rows = run_tier(args.tier, m, sample_points(m, args.points, seed=args.seed))
        counts = {s: sum(r.status == s for r in rows) for s in (PASS, FAIL, NOT_APPLICABLE)}
        worst = max((r.max_residual for r in rows if r.status in (PASS, FAIL)), default=0.0)
        failed += counts[FAIL]
        print(f"{name:<16}{counts[PASS]:>6}{counts[FAIL]:>6}{counts[NOT_APPLICABLE]:>6}"
              f"{worst:>12.2e}{time.perf_counter() - t0:>8.1f}")
        for r in rows:
            if r.status == FAIL:
                print(f"    {r.check_id} {r.max_residual:.3e} at {r.argmax_point}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
