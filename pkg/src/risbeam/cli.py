"""Command-line entry point.

Subcommands map one-to-one onto the experiment drivers: `beampattern`,
`sweep-m`, and `heatmap` write CSV (and optionally PNG) artifacts, while
`run` and `baseline` execute a single trial and print a JSON summary to
stdout. Heavy imports happen after argument parsing so `--help` stays fast.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


def _int_list(text: str):
    items = tuple(int(x) for x in text.split(",") if x.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated int list")
    return items


def _add_config_flags(sp):
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--config", type=Path, metavar="PATH",
                       help="JSON config file")
    group.add_argument("--profile", choices=("paper", "desk"),
                       help="bundled profile (default: desk)")


def _add_output_flags(sp):
    sp.add_argument("--out", type=Path, default=Path("."), metavar="DIR",
                    help="output directory (default: current)")
    sp.add_argument("--plot", action="store_true",
                    help="also render a PNG next to the CSV")


def _add_seed_flags(sp):
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--seeds", type=int, default=20, metavar="N",
                       help="number of derived trial seeds (default 20)")
    group.add_argument("--seed-list", type=_int_list, metavar="A,B,...",
                       help="explicit seeds instead of derived ones")
    sp.add_argument("--workers", type=int, default=1, metavar="N",
                    help="trial-level process pool size (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risbeam",
        description="Reflect-assisted downlink sensing/communication "
                    "beampattern design experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    bp = sub.add_parser("beampattern",
                        help="seed-averaged normalized beampattern CSV")
    _add_config_flags(bp)
    _add_seed_flags(bp)
    _add_output_flags(bp)
    bp.add_argument("--m-list", type=_int_list, metavar="A,B,...",
                    help="element counts (default: config value)")

    sw = sub.add_parser("sweep-m",
                        help="mean min-gain vs element count, paired designs")
    _add_config_flags(sw)
    _add_seed_flags(sw)
    _add_output_flags(sw)
    sw.add_argument("--m-list", type=_int_list, default=(8, 12, 16),
                    metavar="A,B,...")

    hm = sub.add_parser("heatmap", help="ground illumination map CSV")
    _add_config_flags(hm)
    _add_output_flags(hm)
    hm.add_argument("--seed", type=int, default=None)
    hm.add_argument("--resolution", type=int, default=101)

    for name, blurb in (("run", "single clustered trial, JSON to stdout"),
                        ("baseline", "single baseline trial, JSON to stdout")):
        sp = sub.add_parser(name, help=blurb)
        _add_config_flags(sp)
        sp.add_argument("--seed", type=int, default=None)

    return parser


def _load(args):
    from .config import load_config, load_profile

    if args.config is not None:
        return load_config(args.config)
    return load_profile(args.profile or "desk")


def _seeds(args, config):
    from .experiments import trial_seeds

    if getattr(args, "seed_list", None):
        return list(args.seed_list)
    return trial_seeds(config, args.seeds)


def _single_seed(args, config):
    return args.seed if args.seed is not None else (config.rng_seed, 0)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import ConfigError, InfeasibleError

    try:
        config = _load(args)
    except (ConfigError, FileNotFoundError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    try:
        return _dispatch(args, config)
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 3


def _dispatch(args, config) -> int:
    from . import experiments

    if args.command in ("beampattern", "sweep-m", "heatmap"):
        args.out.mkdir(parents=True, exist_ok=True)

    if args.command == "beampattern":
        path = experiments.cli_beampattern(
            config, _seeds(args, config), m_list=args.m_list, out=args.out,
            plot=args.plot, workers=args.workers)
        print(f"wrote {path}")
        return 0
    if args.command == "sweep-m":
        path = experiments.cli_sweep_m(
            config, args.m_list, _seeds(args, config), out=args.out,
            plot=args.plot, workers=args.workers)
        print(f"wrote {path}")
        return 0
    if args.command == "heatmap":
        path = experiments.cli_heatmap(
            config, _single_seed(args, config), resolution=args.resolution,
            out=args.out, plot=args.plot)
        print(f"wrote {path}")
        return 0
    if args.command == "run":
        result = experiments.run_noma_trial(config, _single_seed(args, config))
        print(experiments.trial_json(result))
        return 0
    if args.command == "baseline":
        result = experiments.run_baseline_trial(config,
                                                _single_seed(args, config))
        print(experiments.trial_json(result))
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
