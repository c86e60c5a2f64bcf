"""Command line: ``docasim {validate,reserve,simulate,figure}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error. Errors are
reported on stderr as a single ``docasim: error kind=... key=... msg=...`` line.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import dump_config, fingerprint, parse_config
from .harness import (REPORT_VERSION, RunManifest, figure_rows, output_path, parse_seeds,
                      parse_sweep, reservation_rows, simulation_rows)
from .model import ConfigError
from .report import write_report

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _common(p: argparse.ArgumentParser, seeds: bool = True, sweep: bool = True) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML scenario file (defaults if omitted)")
    if seeds:
        p.add_argument("--seeds", metavar="LIST", help="e.g. 1-20 or 1,2,5")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if sweep:
        p.add_argument("--sweep", metavar="KEY=V1,V2,...", action="append", default=[],
                       help="sweep axis; repeat for a cartesian product")
    p.add_argument("--jobs", type=int, default=1, help="parallel scenario runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docasim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file and print its normalized form")
    p.add_argument("--config", metavar="PATH", required=True)

    p = sub.add_parser("reserve", help="required reserved RBs over l, gamma, rel_target grids")
    _common(p, seeds=False)

    p = sub.add_parser("simulate", help="scheduling KPIs per (config, seed)")
    _common(p)
    p.add_argument("--layout", choices=("wide", "long"), default="wide")

    p = sub.add_parser("figure", help="run a canonical sweep preset")
    p.add_argument("name", help="fig3, fig4 or fig5")
    _common(p, sweep=False)
    return parser


def _manifest(args) -> RunManifest:
    return RunManifest(
        config_path=args.config,
        seeds=parse_seeds(args.seeds) if getattr(args, "seeds", None) else None,
        axes=parse_sweep(getattr(args, "sweep", [])),
        out_dir=args.out,
        fmt=args.format,
        layout=getattr(args, "layout", "wide"),
        jobs=args.jobs,
    )


def _error(kind: str, msg: str, key: str = "-") -> None:
    msg = " ".join(str(msg).split())
    print(f"docasim: error kind={kind} key={key} msg={msg}", file=sys.stderr)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = parse_config(args.config)
            sys.stdout.write(f"# ok fingerprint={fingerprint(config)}\n")
            sys.stdout.write(dump_config(config))
            return EXIT_OK
        manifest = _manifest(args)
        Path(manifest.out_dir).mkdir(parents=True, exist_ok=True)
        if args.command == "reserve":
            rows, stem = reservation_rows(manifest), "reservation"
        elif args.command == "simulate":
            rows, stem = simulation_rows(manifest), "simulate"
        else:
            rows, stem = figure_rows(args.name, manifest), args.name
    except ConfigError as exc:
        _error("config", exc.message, exc.key)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported via the exit-code contract
        _error("runtime", f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    try:
        path = write_report(rows, manifest.fmt, output_path(manifest, stem),
                            comment=f"{REPORT_VERSION} {stem}")
    except Exception as exc:  # noqa: BLE001
        _error("runtime", f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
