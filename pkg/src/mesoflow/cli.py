"""Command-line entry point: ``mesoflow run [CONFIG] [options]``."""

from __future__ import annotations

import argparse
import sys

from .config import MODES, PRESETS, load_file, resolve
from .errors import ConfigError, MesoflowError
from .export import NonFiniteError
from .runner import EXIT_INVALID, run


def _couplings(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"couplings must be comma-separated numbers, got {text!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="mesoflow", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="trace a scene or run the grid evolver")
    r.add_argument("config", nargs="?", help="TOML config, or a previous report.json to replay")
    r.add_argument("--preset", choices=PRESETS)
    r.add_argument("--coupling", type=_couplings, help="comma-separated couplings in [0, 1]")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seeds", type=int, help="number of seeds along the seed segment")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--q-scale", type=float)
    r.add_argument("--reduction", choices=("3d", "transverse"))
    r.add_argument("--workers", type=int, help="worker processes (default: MESOFLOW_THREADS or CPU count)")
    return ap


def _overrides(ns):
    ov = {"couplings": ns.coupling, "out": ns.out, "mode": ns.mode}
    if ns.seeds is not None:
        ov["seeds"] = {"count": ns.seeds}
    meso = {k: v for k, v in (("q_scale", ns.q_scale), ("reduction", ns.reduction)) if v is not None}
    if meso:
        ov["meso"] = meso
    return {k: v for k, v in ov.items() if v is not None}


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        data = load_file(ns.config) if ns.config else {}
        if ns.config is None and ns.preset is None:
            raise ConfigError("give a config file or --preset")
        cfg = resolve(data, preset_name=ns.preset, overrides=_overrides(ns))
    except ConfigError as exc:
        print(f"mesoflow: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        report, code = run(cfg, workers=ns.workers)
    except NonFiniteError as exc:
        print(f"mesoflow: aborted: {exc}", file=sys.stderr)
        return 1
    except (MesoflowError, OSError) as exc:
        print(f"mesoflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"mesoflow: {report['status']}; outputs in {cfg['out']}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
