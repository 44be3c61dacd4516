"""Command line entry point: ``twinris single|sweep|oracle``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .channel import channel_to_json, draw_channel
from .config import ConfigError, load_config, trial_rng
from .experiments import (
    Method,
    SweepSpec,
    _record_for,
    design_for,
    oracle_exhaustive_subarray,
    random_hermitian_psd,
    rows_to_csv,
    run_sweep,
    write_csv,
    ccm_settings,
)
from .hybrid import QuantizerSet, greedy_subarray, subarray_rate
from .metrics import PowerModel
from .passive import random_phases

log = logging.getLogger("twinris")

FIGURE_TRIALS = 500


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    return cfg.replace(**changes) if changes else cfg


def cmd_single(args) -> int:
    cfg = _load(args)
    method = Method.parse(args.method)
    rng = trial_rng(cfg.seed, args.trial)
    chan = draw_channel(cfg, rng)
    phi0 = random_phases(rng, cfg.nris)

    trace_rows = []

    def cb(j, it, st):
        trace_rows.append((j, it, st.value, st.step, st.grad_norm, int(st.accepted)))

    design = design_for(chan, cfg, method, phi0, ccm_settings(cfg),
                        ccm_callback=cb if args.trace else None)
    rec = _record_for(chan, cfg, method, design, PowerModel())

    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subarray", "iter", "objective", "step", "grad_norm", "accepted"])
            w.writerows(trace_rows)
    if args.dump_channel:
        with open(args.dump_channel, "w") as fh:
            fh.write(channel_to_json(chan))
    if args.dump_beamformer:
        with open(args.dump_beamformer, "w") as fh:
            fh.write(design.beamformer.to_json())

    out = dict(rec.to_dict(), method=str(method), seed=cfg.seed, trial=args.trial)
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_sweep(args) -> int:
    if args.figure_scale and args.trials is None:
        args.trials = FIGURE_TRIALS
    cfg = _load(args)
    spec = SweepSpec.load(args.spec)
    rows = run_sweep(spec, cfg, threads=args.threads)
    if args.out:
        write_csv(rows, args.out)
    else:
        sys.stdout.write(rows_to_csv(rows))
    failed = [r for r in rows if r.error]
    for r in failed:
        log.error("point %s %s failed: %s", r.axis_value, r.method, r.error)
    return 0


def cmd_oracle(args) -> int:
    rng = np.random.default_rng(args.seed)
    b = random_hermitian_psd(rng, args.m)
    q_high, q_low = QuantizerSet(args.b_high), QuantizerSet(args.b_low)
    best, design = oracle_exhaustive_subarray(b, q_high, q_low, args.pt, args.sigma2, args.ns)
    greedy = greedy_subarray(b, q_high, q_low, args.pt, args.sigma2, args.ns)
    out = {
        "m": args.m,
        "oracle_rate": best,
        "oracle_mask": design.resolution_mask.tolist(),
        "oracle_indices": design.phase_indices.tolist(),
        "greedy_rate": subarray_rate(greedy.phase_vector, b, args.pt, args.sigma2, args.ns),
        "greedy_mask": greedy.resolution_mask.tolist(),
        "greedy_indices": greedy.phase_indices.tolist(),
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinris", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("single", help="design one channel draw and print its metrics as JSON")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--trial", type=int, default=0)
    s.add_argument("--method", default="TWIN")
    s.add_argument("--trace", metavar="CSV", help="write per-iteration RIS optimizer log")
    s.add_argument("--dump-channel", metavar="JSON")
    s.add_argument("--dump-beamformer", metavar="JSON")
    s.set_defaults(func=cmd_single)

    w = sub.add_parser("sweep", help="Monte Carlo sweep to CSV")
    w.add_argument("--config")
    w.add_argument("--spec", required=True)
    w.add_argument("--out")
    w.add_argument("--seed", type=int)
    w.add_argument("--trials", type=int)
    w.add_argument("--threads", type=int, default=1)
    w.add_argument("--figure-scale", action="store_true",
                   help=f"use {FIGURE_TRIALS} trials per point unless --trials is given")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="exhaustive vs greedy sub-array design on a random B")
    o.add_argument("--m", type=int, default=2)
    o.add_argument("--b-high", type=int, default=2)
    o.add_argument("--b-low", type=int, default=1)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--pt", type=float, default=1.0)
    o.add_argument("--sigma2", type=float, default=1.0)
    o.add_argument("--ns", type=int, default=1)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
