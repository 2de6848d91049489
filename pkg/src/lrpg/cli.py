"""Command line entry point: ``lrpg run | eval | gradcheck``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .factored import CheckpointError, load_checkpoint
from .gradcheck import run_gradcheck
from .harness import ConfigError, export, parse_config, parse_config_text, run_experiment
from .policy import FixedSigma, PolicyParams
from .trainer import TabularActor, greedy_episode

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

GRADCHECK_TOL = {"dlogp_dmu": 1e-6, "dlogp_dsigma": 1e-6}
DEFAULT_TOL = 1e-5


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seeds is not None:
        if args.seeds < 1:
            print("config error: --seeds must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        cfg = replace(cfg, seeds=list(range(args.seeds)))
    out = Path(args.out if args.out is not None else cfg.out)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    try:
        results = run_experiment(cfg, out_dir=out, jobs=args.jobs, log=log)
        export(cfg, results, out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        print((out / "summary.csv").read_text(), end="")
    if all(r.failed for rs in results.values() for r in rs):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        x_mu = load_checkpoint(args.checkpoint)
    except (OSError, CheckpointError) as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config:
            cfg = parse_config(args.config)
            if cfg.env != args.env:
                raise ConfigError(f"config is for {cfg.env!r}, not {args.env!r}")
        else:
            cfg = parse_config_text(f"env = {args.env}\n")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    grid = cfg.grid
    if x_mu.shape != (grid.rows, grid.cols):
        print(f"config error: checkpoint is {x_mu.n_rows}x{x_mu.n_cols} but the "
              f"{args.env} grid is {grid.rows}x{grid.cols}", file=sys.stderr)
        return EXIT_CONFIG

    env = cfg.make_env()
    actor = TabularActor(PolicyParams(x_mu, FixedSigma(1.0)), grid)
    rng = np.random.default_rng(args.seed)
    returns = []
    for k in range(args.episodes):
        ret, _ = greedy_episode(env, actor, rng, env.horizon)
        returns.append(ret)
        print(f"episode {k} return {ret:.6f}")
    print(f"mean return {np.mean(returns):.6f} over {len(returns)} episodes")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst = run_gradcheck(instances=args.instances, seed=args.seed)
    ok = True
    for name, err in worst.items():
        tol = GRADCHECK_TOL.get(name, DEFAULT_TOL)
        passed = err <= tol
        ok &= passed
        print(f"{name:15s} max_rel_err={err:.3e} tol={tol:.0e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_RUNTIME


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors; 2 is reserved for failed runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrpg", description="Low-rank policy-gradient experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="train every configured algorithm over every seed")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: the config's 'out')")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1 instead of the config's list")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="greedy rollouts of a saved mean-matrix checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--config", help="config the checkpoint was trained with (for its grid)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
