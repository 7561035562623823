"""Command-line front end.

Three subcommands: `build-moas` constructs (or warms the cache for) the
admissible set of a configuration, `run` executes a scenario and writes
its log and summary, and `serve` starts the live teleoperation service.

Exit codes: 0 success, 2 initial infeasibility, 3 admissible-set build
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("visgov")


def _add_common(parser, out_dir=False):
    parser.add_argument("--config", type=Path, default=None, help="JSON config file merged over the preset defaults")
    parser.add_argument(
        "--scenario",
        choices=("circle", "waypoints"),
        default="circle",
        help="preset supplying the defaults",
    )
    parser.add_argument(
        "--cache-dir",
        type=Path,
        default=Path.cwd() / ".visgov_cache",
        help="directory for cached admissible sets",
    )
    if out_dir:
        parser.add_argument("--out-dir", type=Path, default=Path.cwd() / "runs", help="directory for run artifacts")


def _rg_flag(parser):
    parser.add_argument("--rg", choices=("on", "off"), default=None, help="override the governor switch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visgov",
        description="visibility-constrained reference governor toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="chatty logging")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-moas", help="construct the admissible set offline and cache it")
    _add_common(b)

    r = sub.add_parser("run", help="run a scenario, write log CSV and summary JSON")
    _add_common(r, out_dir=True)
    _rg_flag(r)
    r.add_argument("--duration", type=float, default=None, help="override run duration (s)")
    r.add_argument("--seed", type=int, default=None, help="seed for any randomized config extensions")
    r.add_argument("--tag", default=None, help="artifact basename (default: scenario name, '_rgoff' suffixed)")

    s = sub.add_parser("serve", help="start the live teleoperation service")
    _add_common(s)
    _rg_flag(s)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument(
        "--port",
        type=int,
        default=int(os.environ.get("VISGOV_PORT", "8700")),
        help="listen port (env VISGOV_PORT)",
    )
    s.add_argument(
        "--as-fast-as-possible",
        action="store_true",
        help="run the control loop unpaced (headless tests)",
    )
    return parser


def _load(args, overrides=None):
    from .scenarios import load_config

    return load_config(args.config, preset=args.scenario, overrides=overrides)


def cmd_build_moas(args) -> int:
    from .moas import MoasBuildError
    from .scenarios import build_or_load_moas

    cfg = _load(args)
    try:
        moas, _, _ = build_or_load_moas(cfg, args.cache_dir)
    except MoasBuildError as exc:
        print(f"admissible-set build failed: {exc}", file=sys.stderr)
        return 3
    info = moas.build_info
    print(
        f"k*={moas.k_star} rows={moas.n_rows} epsilon={moas.epsilon:g} "
        f"build_seconds={info.get('build_seconds', 'cached')} cache={args.cache_dir}"
    )
    return 0


def cmd_run(args) -> int:
    from .scenarios import run_scenario

    overrides = {}
    if args.rg is not None:
        overrides["rg"] = args.rg == "on"
    if args.duration is not None:
        overrides["duration"] = args.duration
    cfg = _load(args, overrides)
    if args.seed is not None:
        np.random.seed(args.seed)
    tag = args.tag
    if tag is None:
        tag = args.scenario if cfg["rg"] else f"{args.scenario}_rgoff"
    _, summary, code = run_scenario(cfg, out_dir=args.out_dir, cache_dir=args.cache_dir, tag=tag)
    if code != 0:
        print(f"run failed (exit {code}): {summary.get('error', '')}", file=sys.stderr)
        return code
    print(json.dumps(summary, indent=2, sort_keys=True))
    print(f"artifacts: {args.out_dir / (tag + '_log.csv')} {args.out_dir / (tag + '_summary.json')}")
    return 0


def cmd_serve(args) -> int:
    from .governor import InfeasibleError
    from .moas import MoasBuildError
    from .teleop import serve

    overrides = {}
    if args.rg is not None:
        overrides["rg"] = args.rg == "on"
    cfg = _load(args, overrides)
    try:
        serve(
            cfg,
            cache_dir=args.cache_dir,
            host=args.host,
            port=args.port,
            paced=not args.as_fast_as_possible,
        )
    except MoasBuildError as exc:
        print(f"admissible-set build failed: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible start: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"build-moas": cmd_build_moas, "run": cmd_run, "serve": cmd_serve}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
