"""Command-line entry point.

Subcommands::

    run        run a scenario config into an output directory
    validate   check a config and print issues
    plot-data  turn a finished run into per-figure CSV bundles and PNGs
    calibrate  run the calibration arithmetic of a config

Exit status: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import shutil
import sys
import tempfile
import traceback
from pathlib import Path

from . import __version__
from .config import dump_config, load_config, validate_config
from .errors import ConfigError
from .io import OutputWriter

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("superradiance")


def _module_tag(exc: BaseException) -> str:
    # innermost frame inside the package names the failing module
    tag = "superradiance"
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename)
        if path.parent.name == "superradiance":
            tag = path.stem
    return tag


def _resolve_paths(cfg: dict, base: Path) -> dict:
    sec = cfg.get("calibration")
    if sec and sec.get("traces"):
        sec["traces"] = {k: str((base / v).resolve()) for k, v in sec["traces"].items()}
    return cfg


def run_scenario(config_path, out_dir, seed=None, jobs=1, fmt=None, kind=None) -> dict:
    """Run a config into ``out_dir``; raises on failure leaving ``out_dir`` untouched."""
    from .scenarios import RUNNERS

    config_path = Path(config_path)
    cfg = load_config(config_path)
    if kind is not None and cfg["kind"] != kind:
        raise ConfigError(f"expected a {kind} config, got {cfg['kind']}", "kind")
    if seed is not None:
        cfg["seed"] = int(seed)
    if fmt is not None:
        cfg["outputs"]["format"] = fmt
    cfg = _resolve_paths(cfg, config_path.parent)

    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    try:
        writer = OutputWriter(staging, cfg["outputs"]["format"])
        normalized = dump_config(cfg)
        writer.text("config.yaml", normalized)
        summary = RUNNERS[cfg["kind"]](cfg, writer, jobs)
        writer.json("summary", summary)
        meta = {
            "kind": cfg["kind"],
            "seed": cfg["seed"],
            "version": __version__,
            "config_sha256": hashlib.sha256(normalized.encode()).hexdigest(),
        }
        if cfg["kind"] == "triggered_sr":
            meta["bootstrap"] = cfg["triggered_sr"]["bootstrap"]
        writer.manifest(meta)
        out.mkdir(parents=True, exist_ok=True)
        for item in staging.iterdir():
            target = out / item.name
            if target.is_dir():
                shutil.rmtree(target)
            shutil.move(str(item), str(target))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return summary


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superradiance", description="Superradiant burst simulations")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for shots")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="table format")

    common(sub.add_parser("run", help="run a scenario"))
    common(sub.add_parser("calibrate", help="run the calibration scenario"))
    p = sub.add_parser("validate", help="check a config")
    p.add_argument("--config", required=True)
    p = sub.add_parser("plot-data", help="emit per-figure bundles for a finished run")
    p.add_argument("--out", required=True, help="run directory (bundles go to OUT/plots)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=None, help="unused; accepted for symmetry")
    p.add_argument("--jobs", type=int, default=1, help="unused; accepted for symmetry")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            issues = validate_config(args.config)
            for issue in issues:
                print(issue)
            if any(i.level == "error" for i in issues):
                return EXIT_CONFIG
            print("ok")
            return EXIT_OK
        if args.command == "plot-data":
            from .plotting import emit_plot_data

            for name in emit_plot_data(args.out, fmt=args.format):
                print(name)
            return EXIT_OK
        kind = "calibration" if args.command == "calibrate" else None
        run_scenario(args.config, args.out, args.seed, args.jobs, args.format, kind)
        print(f"wrote {args.out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # every other failure is a runtime error
        log.debug("traceback", exc_info=True)
        print(f"runtime error [{_module_tag(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
