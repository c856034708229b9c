"""Command line entry point: ``eedi run|batch|summarize|presets``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, config, presets
from .config import CONTROLLERS
from .harness import emit, parse_records, run_batch, summarize, summary_csv

log = logging.getLogger("eedi")


def _controller(name: str) -> str:
    key = name.upper()
    if key not in CONTROLLERS:
        raise argparse.ArgumentTypeError(f"unknown controller {name!r}; choose from {', '.join(CONTROLLERS)}")
    return key


def _scenario(args):
    if args.scenario and args.preset:
        raise SystemExit("error: give either --scenario or --preset, not both")
    if args.scenario:
        try:
            cfg = config.load(args.scenario)
        except (OSError, ValueError) as exc:
            raise SystemExit(f"error: {args.scenario}: {exc}")
    elif args.preset:
        try:
            cfg = presets.get(args.preset)
        except KeyError as exc:
            raise SystemExit(f"error: {exc.args[0]}")
    else:
        raise SystemExit("error: one of --scenario or --preset is required")
    if args.dump_eid:
        cfg = cfg.replace(dump_eid=True)
    return cfg


def _scenario_args(p):
    p.add_argument("--scenario", help="scenario YAML file")
    p.add_argument("--preset", help="built-in scenario name (see `eedi presets list`)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dump-eid", action="store_true", help="store the EID grid of every horizon")


def cmd_run(args):
    cfg = _scenario(args)
    ctrl = args.controller[0] if args.controller else cfg.controller
    summary, records = run_batch(cfg, [ctrl], 1, args.seed)
    emit(records, summary, args.out, seed=args.seed, template=cfg)
    rec = records[0]
    print(f"{rec.controller}: {rec.termination.cause} after {rec.completion_time:g} s, success={rec.success}")
    return 0


def cmd_batch(args):
    cfg = _scenario(args)
    ctrls = args.controller or list(CONTROLLERS)
    summary, records = run_batch(cfg, ctrls, args.trials, args.seed, n_jobs=args.jobs)
    emit(records, summary, args.out, seed=args.seed, template=cfg)
    sys.stdout.write(summary_csv(summary))
    return 0


def cmd_summarize(args):
    try:
        with open(args.records) as fh:
            records = parse_records(fh.read())
    except OSError as exc:
        raise SystemExit(f"error: {exc}")
    if not records:
        sys.stdout.write(summary_csv(None))
        return 0
    sys.stdout.write(summary_csv(summarize(records)))
    return 0


def cmd_presets(args):
    if args.action == "list":
        for name in presets.names():
            print(name)
        return 0
    if not args.name:
        raise SystemExit("error: presets show needs a preset name")
    try:
        sys.stdout.write(config.dumps(presets.get(args.name)))
    except KeyError as exc:
        raise SystemExit(f"error: {exc.args[0]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eedi", description="Ergodic search for target localization.")
    parser.add_argument("--version", action="version", version=f"eedi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one closed-loop trial")
    _scenario_args(p)
    p.add_argument("--controller", type=_controller, nargs=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run randomized trials for several controllers")
    _scenario_args(p)
    p.add_argument("--controller", type=_controller, nargs="+", help="default: all five")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("summarize", help="recompute the summary table from trials.jsonl")
    p.add_argument("records", help="path to trials.jsonl")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("presets", help="list or show built-in scenarios")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "trials", 1) < 1:
        raise SystemExit("error: --trials must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
