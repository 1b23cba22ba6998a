"""Command line entry point: ``risnoma {run,sweep,predict,report}``."""

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import harness
from .config import load_config
from .errors import ConfigError, IllPosedError, TraceParseError, TrainingDivergedError
from .traffic import generate_trace, load_trace, one_step_nrmse


def _seeds(args, default):
    if args.seed is None:
        return default
    return tuple(range(args.seed, args.seed + args.n_seeds))


def cmd_run(args):
    scene, agent, exp = load_config(args.config)
    if "name" not in exp:
        exp["name"] = "run"
    spec = harness.ExperimentSpec(
        name=exp.pop("name"), scene=scene, agent=agent,
        out_dir=args.out or exp.pop("out_dir", "results"),
        seeds=_seeds(args, exp.pop("seeds", tuple(range(10)))),
        **{k: v for k, v in exp.items() if k != "out_dir"})
    rows = harness.run_experiment(spec)
    print(f"wrote {len(rows)} rows to {spec.out_dir}")


def cmd_sweep(args):
    overrides = {}
    if args.quick:
        overrides.update(realizations=2, episodes=20, steps_per_episode=10)
    if args.workers:
        overrides["workers"] = args.workers
    spec = harness.preset(args.preset, out_dir=args.out or "results",
                          seeds=_seeds(args, tuple(range(10))), **overrides)
    rows = harness.run_experiment(spec)
    print(f"{args.preset}: wrote {len(rows)} rows to {spec.out_dir}")


def cmd_predict(args):
    if args.trace:
        trace = load_trace(args.trace)
    else:
        trace = generate_trace(args.kind, args.length, seed=args.seed or 0)
    cfg = dataclasses.replace(harness.TRAFFIC_ESN, kind=args.neuron, n_reservoir=args.reservoir,
                              ridge=args.ridge)
    series = trace.series(trace.user_ids[0])
    err, model = one_step_nrmse(series, cfg, seed=args.seed or 0)
    print(f"one-step NRMSE on held-out intervals: {err:.4f}")
    ahead = model.predict(series, args.horizon)
    print("next demands (bits):", " ".join(f"{v:.4g}" for v in ahead))


def cmd_report(args):
    for path in args.csv:
        rows = harness.read_rows(path)
        print(path)
        print(f"  {'variant':<20}{'grid':>10}{'seeds':>7}{'mean EE':>12}{'sd':>10}")
        groups = {}
        for r in rows:
            groups.setdefault((r.variant, r.grid_value), []).append(r.mean_ee)
        for (v, g), ees in groups.items():
            print(f"  {v:<20}{g:>10g}{len(ees):>7}{np.mean(ees):>12.5g}{np.std(ees):>10.3g}")


def build_parser():
    p = argparse.ArgumentParser(prog="risnoma", description="RIS-assisted NOMA experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="first seed")
        sp.add_argument("--n-seeds", type=int, default=1, help="number of consecutive seeds")
        sp.add_argument("--out", default=None, help="output directory")

    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("config")
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a named preset")
    s.add_argument("--preset", required=True, choices=harness.PRESETS)
    s.add_argument("--quick", action="store_true", help="tiny budget for smoke runs")
    s.add_argument("--workers", type=int, default=0)
    common(s)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("predict", help="fit an echo state network to a traffic trace")
    t.add_argument("--trace", help="CSV with user_id, interval, demand_bits")
    t.add_argument("--kind", default="diurnal", choices=("diurnal", "bursty"))
    t.add_argument("--length", type=int, default=24 * 7 * 5)
    t.add_argument("--neuron", default="lstm", choices=("tanh", "lstm"))
    t.add_argument("--reservoir", type=int, default=200)
    t.add_argument("--horizon", type=int, default=24)
    t.add_argument("--ridge", type=float, default=harness.TRAFFIC_ESN.ridge)
    common(t)
    t.set_defaults(func=cmd_predict)

    rp = sub.add_parser("report", help="summarize result CSVs")
    rp.add_argument("csv", nargs="+")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, IllPosedError, TraceParseError, TrainingDivergedError, OSError,
            ValueError) as exc:
        print(f"risnoma: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
