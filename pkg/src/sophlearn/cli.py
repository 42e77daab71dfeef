"""Command-line entry point: ``sophlearn run|stats|plot|replay|config``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .agents import load_snapshot
from .config import dump_config, load_config
from .env import Action
from .harness import (ConfigError, ExperimentConfig, bootstrap_contrasts, emit_learning_curves, one_way_anova,
                      read_events, read_records, run_experiment, validate_svg)

PROFILES = {"desk": ExperimentConfig.desk, "paper": ExperimentConfig.paper}


def parse_window(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        a, b = int(lo), int(hi)
    except ValueError as err:
        raise ConfigError(f"window must look like 'a..b', got {text!r}") from err
    if a > b or a < 0:
        raise ConfigError(f"empty iteration window {text!r}")
    return a, b


def cmd_run(args) -> int:
    cfg = PROFILES[args.profile]() if args.profile else ExperimentConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trace:
        overrides["trace"] = True
    if args.workers is not None:
        overrides["workers"] = args.workers
    overrides["out_dir"] = args.out
    cfg = replace(cfg, **overrides)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(cfg))
    total = len(cfg.algorithms) * cfg.episodes * cfg.iterations

    def progress(n):
        logging.info("%d/%d trials", n, total)

    records, events = run_experiment(cfg, progress=progress)
    for alg in cfg.algorithms:
        s = np.array([r.steps_survived for r in records if r.algorithm == alg], dtype=float)
        print(f"{alg:7s} mean {s.mean():6.2f}  sd {s.std(ddof=1) if s.size > 1 else 0.0:6.2f}  n {s.size}")
    print(f"records written to {os.path.join(cfg.out_dir, 'records.csv')}")
    return 0


def cmd_stats(args) -> int:
    records = read_records(args.records)
    lo, hi = parse_window(args.window) if args.window else (0, max(r.iteration for r in records))
    present = [a for a in dict.fromkeys(r.algorithm for r in records)]
    print(f"iterations {lo}..{hi}")
    groups = []
    for alg in present:
        s = np.array([r.steps_survived for r in records if r.algorithm == alg and lo <= r.iteration <= hi], float)
        if s.size == 0:
            raise ConfigError(f"no records for {alg} in window {lo}..{hi}")
        groups.append(s)
        print(f"{alg:7s} mean {s.mean():6.2f}  sd {s.std(ddof=1) if s.size > 1 else 0.0:6.2f}  n {s.size}")
    if len(groups) >= 2 and all(g.size >= 2 for g in groups):
        F, p = one_way_anova(groups)
        print(f"ANOVA F = {F:.4f}  p = {p:.4g}")
        for c in bootstrap_contrasts(records, (lo, hi), n_boot=args.n_boot, seed=args.seed, unit=args.unit).values():
            print(f"{c.first}-{c.second}: {c.estimate:+.3f}  CI [{c.ci_low:+.3f}, {c.ci_high:+.3f}]  p = {c.p:.4g}")
    events_path = os.path.join(os.path.dirname(os.path.abspath(args.records)), "events.csv")
    if os.path.exists(events_path):
        events = [e for e in read_events(events_path) if lo <= e.iteration <= hi]
        for alg in present:
            ev = [e for e in events if e.algorithm == alg]
            if ev:
                rate = np.mean([e.hill_within_window for e in ev])
                print(f"{alg:7s} hill within window after first discovery: {rate:.3f} of {len(ev)} events")
    return 0


def cmd_plot(args) -> int:
    records = read_records(args.records)
    emit_learning_curves(records, args.out, window=args.smooth)
    problems = validate_svg(args.out)
    if problems:
        for p in problems:
            print(f"svg problem: {p}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def cmd_replay(args) -> int:
    agent = load_snapshot(args.state)
    cfg = agent.config
    pos = int(np.argmax(agent.belief.position))
    print(f"algorithm {cfg.algorithm}  position {agent.grid.xy(pos)}  clocks {tuple(agent.clocks)}")
    print("context belief " + " ".join(f"{v:.3f}" for v in agent.belief.context))
    if agent.A_counts is not None:
        print(f"likelihood counts total {agent.A_counts.counts.sum():.2f}  model error {agent.model_error():.4f}")
    values = agent.action_values()
    for a, v in zip(Action, values):
        print(f"  {a.name.lower():6s} {v: .6f}")
    print(f"chosen action: {Action(int(np.argmax(values))).name.lower()}")
    return 0


def cmd_config(args) -> int:
    cfg = PROFILES[args.profile]() if args.profile else ExperimentConfig()
    sys.stdout.write(dump_config(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sophlearn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write records.csv")
    run.add_argument("--config")
    run.add_argument("--profile", choices=sorted(PROFILES))
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int)
    run.add_argument("--trace", action="store_true")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    st = sub.add_parser("stats", help="window means, ANOVA and bootstrap contrasts")
    st.add_argument("--records", required=True)
    st.add_argument("--window", help="inclusive iteration range a..b")
    st.add_argument("--n-boot", type=int, default=10_000)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--unit", choices=("trial", "episode"), default="trial")
    st.set_defaults(func=cmd_stats)

    pl = sub.add_parser("plot", help="SVG learning curves")
    pl.add_argument("--records", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--smooth", type=int, default=5)
    pl.set_defaults(func=cmd_plot)

    rp = sub.add_parser("replay", help="re-plan from a saved agent state")
    rp.add_argument("--state", required=True)
    rp.set_defaults(func=cmd_replay)

    cf = sub.add_parser("config", help="print a complete config file")
    cf.add_argument("--profile", choices=sorted(PROFILES))
    cf.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
