"""One-step prediction error of tanh and LSTM reservoirs on synthetic traffic.

    python3 scripts/compare_esn.py --seeds 10 --kind diurnal
"""

import argparse
import dataclasses

import numpy as np

from risnoma.harness import TRAFFIC_ESN
from risnoma.traffic import generate_trace, one_step_nrmse


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--kind", default="diurnal", choices=("diurnal", "bursty"))
    ap.add_argument("--weeks", type=int, default=6)
    ap.add_argument("--ridge", type=float, default=TRAFFIC_ESN.ridge)
    args = ap.parse_args()
    errs = {"tanh": [], "lstm": []}
    for s in range(args.seeds):
        series = generate_trace(args.kind, 24 * 7 * args.weeks, seed=s).series()
        for kind in errs:
            cfg = dataclasses.replace(TRAFFIC_ESN, kind=kind, ridge=args.ridge)
            errs[kind].append(one_step_nrmse(series, cfg, seed=s)[0])
    for kind, e in errs.items():
        print(f"{kind:<5} NRMSE mean {np.mean(e):.4f}  max {np.max(e):.4f}")


if __name__ == "__main__":
    main()
