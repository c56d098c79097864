"""Command-line entry point: ``pagecurve {run,sweep,preset}``."""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, ConfigError, load_config, preset_configs
from .experiments import expand_sweep, run_many, write_manifest

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FAILED", "EXIT_USAGE",
           "EXIT_NOT_CONVERGED"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pagecurve",
        description="Entropy dynamics of an oscillator or a qubit coupled "
                    "to an Ohmic Drude-Lorentz bath.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single configuration")
    run.add_argument("--model", choices=("qbm", "spin-boson"))
    run.add_argument("--config", help="TOML file with flat key = value pairs")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a configuration value (repeatable)")
    run.add_argument("--out", required=True, help="output directory")

    sweep = sub.add_parser("sweep", help="run a grid of configurations")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--model", choices=("qbm", "spin-boson"))
    sweep.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE")
    sweep.add_argument("--vary", action="append", default=[],
                       metavar="KEY=V1,V2,...",
                       help="parameter range; several --vary form a product")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--out", required=True)

    preset = sub.add_parser("preset", help="reproduce a figure's data")
    preset.add_argument("name", choices=sorted(PRESETS))
    preset.add_argument("--workers", type=int, default=None)
    preset.add_argument("--out", required=True)
    return p


def _report(results) -> int:
    status = EXIT_OK
    for r in results:
        if not r.ok:
            print(f"[failed] {r.name}: {r.error.splitlines()[0]}",
                  file=sys.stderr)
            status = EXIT_FAILED
            continue
        s = r.summary
        line = (f"[ok] {r.name}: t_page={s['t_page']:.6g} "
                f"s_max={s['s_max']:.6g} s_final={s['s_final']:.6g}")
        if r.converged is False:
            line += " (NOT CONVERGED)"
            if status == EXIT_OK:
                status = EXIT_NOT_CONVERGED
        print(line)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = " ".join(["pagecurve", *(sys.argv[1:] if argv is None
                                       else argv)])
    try:
        if args.command == "run":
            if args.config is None and args.model is None:
                raise ConfigError("run needs --model or a --config setting it")
            configs = [load_config(args.config, args.set, args.model)]
            workers = 1
        elif args.command == "sweep":
            template = load_config(args.config, args.set, args.model)
            configs = expand_sweep(template, args.vary)
            workers = args.workers
        else:
            configs = preset_configs(args.name)
            workers = args.workers
    except ConfigError as exc:
        print(f"pagecurve: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    results = run_many(configs, args.out, workers)
    path = write_manifest(results, args.out, command)
    print(f"manifest: {path}")
    return _report(results)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
