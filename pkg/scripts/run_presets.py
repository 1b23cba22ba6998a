"""Run named presets and print per-variant seed means.

    python3 scripts/run_presets.py fig4 fig6 --out results --seeds 10
"""

import argparse
import time

import numpy as np

from risnoma import harness


def table(rows):
    by = {}
    for r in rows:
        by.setdefault(r.variant, {}).setdefault(r.grid_value, []).append(r.mean_ee)
    return by


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("presets", nargs="*", default=list(harness.PRESETS))
    ap.add_argument("--out", default="results")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for name in args.presets:
        t0 = time.perf_counter()
        spec = harness.preset(name, out_dir=args.out, seeds=tuple(range(args.seeds)),
                              workers=args.workers)
        rows = harness.run_experiment(spec)
        print(f"== {name} ({time.perf_counter() - t0:.0f} s) -> {spec.out_dir}")
        for variant, grid in table(rows).items():
            means = " ".join(f"{g:g}:{np.mean(v):.4f}" for g, v in sorted(grid.items()))
            print(f"  {variant:<18} {means}")


if __name__ == "__main__":
    main()
