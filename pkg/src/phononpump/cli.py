"""Command-line interface.

::

    phononpump run [config.yaml] [--preset NAME] [--set key=value]... [--out DIR]
                   [--format csv,json] [--workers N]
    phononpump presets list
    phononpump validate config.yaml

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 I/O failure.
The worker count may also come from ``PHONONPUMP_WORKERS``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import (apply_override, build, load_config, load_preset, load_yaml,
                     preset_names, preset_summary)
from .errors import ConfigError, PhononPumpError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
WORKERS_ENV = "PHONONPUMP_WORKERS"

log = logging.getLogger("phononpump")


def _workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phononpump",
        description="Phonon pumping by a modulated ultrastrong-coupling vacuum.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("config", nargs="?", help="YAML config (optional with --preset)")
    run.add_argument("--preset", help="start from a packaged preset")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key, e.g. params.g=0.01")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--format", help="comma-separated subset of csv,json")
    run.add_argument("--workers", type=int, help=f"worker count (env {WORKERS_ENV})")

    presets = sub.add_parser("presets", help="packaged presets")
    presets_sub = presets.add_subparsers(dest="action", required=True)
    presets_sub.add_parser("list", help="list preset names")
    show = presets_sub.add_parser("show", help="print a preset as YAML")
    show.add_argument("name")

    validate = sub.add_parser("validate", help="check a config without running it")
    validate.add_argument("config")
    validate.add_argument("--set", dest="overrides", action="append", default=[],
                          metavar="KEY=VALUE")
    return parser


def _run(args) -> int:
    from .experiments import run
    from .export import export

    if args.config is None and args.preset is None:
        raise ConfigError("config", "give a config file or --preset")
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"output.directory={args.out}")
    if args.format:
        overrides.append(f"output.formats={args.format}")
    cfg = load_config(args.config, preset=args.preset, overrides=overrides)
    workers = _workers(args.workers)
    record = run(cfg, workers=workers)
    try:
        paths = export(record, cfg.output_dir, cfg.formats)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(path)
    return EXIT_OK


def _presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(f"{name:8s} {preset_summary(name)}")
        return EXIT_OK
    import yaml
    print(yaml.safe_dump(load_preset(args.name), sort_keys=False), end="")
    return EXIT_OK


def _validate(args) -> int:
    data = load_yaml(args.config)
    for item in args.overrides:
        data = apply_override(data, item)
    cfg = build(data)
    print(f"ok: {cfg.experiment} ({cfg.units} units)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _run, "presets": _presets, "validate": _validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhononPumpError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
