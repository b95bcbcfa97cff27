"""Batch orchestration for a resolved configuration.

All tracing fans out through :func:`mesoflow.flow.sweep_coupling`; every file
is written here, after the workers have returned, in input order.
"""

from __future__ import annotations

import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .emfield import GratingField, LGField, MesoParams
from .evolver import (GaussianSource, GridSpec, evolve, plane_wave_state,
                      poynting_residual, step)
from .export import (NonFiniteError, density_rows, export_density, export_flowlines)
from .flow import SeedSpec, default_workers, sweep_coupling
from .modes import GratingScene, LGScene
from .numerics import StepControl

EXIT_CLEAN, EXIT_INVALID, EXIT_FLAGGED = 0, 2, 3


def versions():
    return {"mesoflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_field(cfg):
    meso = MesoParams(**cfg["meso"])
    if cfg["kind"] in ("grating", "double-slit"):
        return GratingField(GratingScene(**cfg["grating"]), meso)
    return LGField(LGScene(**cfg["lg"]), meso)


def _finite_json(obj, where="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NonFiniteError(f"non-finite value {obj} in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite_json(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _finite_json(v, f"{where}[{i}]")


def _spiral_check(scene, lines):
    # S_phi / S_z against l / (k r) at every emitted off-axis point
    worst = 0.0
    count = 0
    for line in lines:
        x, y = line.points[:, 0], line.points[:, 1]
        r = np.hypot(x, y)
        ok = r > 0
        if not np.any(ok):
            continue
        Sphi = (-np.sin(np.arctan2(y, x)) * line.S[:, 0] + np.cos(np.arctan2(y, x)) * line.S[:, 1])[ok]
        want = scene.l / (scene.k * r[ok])
        got = Sphi / line.S[ok, 2]
        err = np.abs(got - want) / np.maximum(np.abs(want), 1e-300)
        worst = max(worst, float(err.max()))
        count += int(ok.sum())
    return {"points": count, "max_rel_error": worst}


def _run_trace(cfg, out, workers):
    fld = build_field(cfg)
    tr = cfg["trace"]
    ctl = StepControl.for_length(fld.length_scale, steps_per_scale=tr["steps_per_scale"],
                                 max_steps=tr["max_steps"], rel_tol=tr["rel_tol"])
    bounds = (tuple(tr["bounds_lo"]), tuple(tr["bounds_hi"]))
    seeds = SeedSpec(tuple(cfg["seeds"]["start"]), tuple(cfg["seeds"]["end"]), cfg["seeds"]["count"])
    modes = ("geometric", "timed") if cfg["mode"] == "both" else (cfg["mode"],)
    scale = fld.length_scale

    all_lines, ids, line_info, failed = [], [], [], []
    metrics = {}
    lid = 0
    for mode in modes:
        res = sweep_coupling(fld, seeds, cfg["couplings"], ctl, mode=mode, bounds=bounds,
                             workers=workers)
        metrics[mode] = {
            "max_path_deviation": res.max_path_deviation,
            "max_path_deviation_over_length_scale": res.max_path_deviation / scale,
            "pairs": len(res.deviations),
        }
        for i, c in enumerate(res.couplings):
            for j, seed in enumerate(res.seeds):
                line = res.lines[i][j]
                info = {"line_id": lid, "mode": mode, "coupling": c, "seed_index": j,
                        "seed": [float(v) for v in seed]}
                if line is None:
                    info.update(terminal=None, points=0, error=res.errors[(i, j)])
                    failed.append(lid)
                else:
                    info.update(terminal=line.terminal, points=len(line),
                                arc_length=float(line.arc_s[-1]), transit_time=float(line.time_t[-1]))
                    all_lines.append(line)
                    ids.append(lid)
                line_info.append(info)
                lid += 1

    export_flowlines(all_lines, out / "flowlines.csv", ids)
    dm = cfg["density_map"]
    rows, skipped = density_rows(fld, cfg["couplings"], dm["lo"], dm["hi"], dm["nx"], dm["ny"])
    export_density(rows, out / "density_map.csv")

    report = {
        "invariance": metrics,
        "lines": line_info,
        "failed_lines": failed,
        "density_map": {"rows": len(rows), "node_points_skipped": skipped},
        "field": {"kind": cfg["kind"], "length_scale": scale, **fld.describe(),
                  "step_control": {"initial_step": ctl.initial_step, "min_step": ctl.min_step,
                                   "max_step": ctl.max_step, "rel_tol": ctl.rel_tol,
                                   "max_steps": ctl.max_steps}},
    }
    if cfg["kind"] == "lg":
        report["spiral_check"] = _spiral_check(fld.scene, all_lines)
    return report, bool(failed)


def evolve_setup(cfg):
    ev = cfg["evolve"]
    h = ev["length"] / ev["cells"]
    spec = GridSpec.from_cfl(ev["dims"], ev["cells"], h, ev["cfl"])
    k = 2 * math.pi * np.linalg.norm(ev["mode"]) / spec.length
    omega = spec.consts.c * k
    steps = int(math.ceil(ev["periods"] * 2 * math.pi / omega / spec.dt))
    src = None
    if ev["source"]:
        src = GaussianSource(centre=(spec.length / 2,) * 3, width=ev["source_width"] * spec.length,
                             amplitude=ev["source_amplitude"], omega=omega, box=spec.length,
                             planar=ev["dims"] == 2)
    state = plane_wave_state(spec, tuple(ev["mode"]), ev["amplitude"])
    return spec, state, src, steps


def _run_evolve(cfg):
    spec, state0, src, steps = evolve_setup(cfg)
    final, rep = evolve(state0, spec, src, steps)
    back = final
    for _ in range(steps):
        back = step(back, spec, src, reverse=True)
    ref = math.sqrt(float(np.sum(state0.E**2) * spec.consts.c**2 + np.sum(state0.B**2) * spec.consts.c**4))
    diff = math.sqrt(float(np.sum((back.E - state0.E) ** 2) * spec.consts.c**2
                           + np.sum((back.B - state0.B) ** 2) * spec.consts.c**4))
    res = poynting_residual([final, step(final, spec, src)], spec, src)
    report = {
        "grid": {"dims": spec.dims, "cells": spec.cells, "h": spec.h, "dt": spec.dt, "cfl": spec.cfl},
        "steps": rep["steps"],
        "energy": rep["energy"],
        "work": rep["work"],
        "energy_drift": rep["energy_drift"],
        "balance_drift": rep["balance_drift"],
        "time_reversal_error": diff / ref if ref > 0 else 0.0,
        "poynting_residual": {"l2": res.l2, "max": res.max},
    }
    return report, False


def run(cfg, *, workers=None):
    """Execute a resolved config; returns ``(report, exit_code)``.

    Files go to ``cfg["out"]``: report.json always, flowlines.csv and
    density_map.csv for trace scenes.
    """
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    workers = default_workers() if workers is None else max(1, int(workers))
    if cfg["kind"] == "evolve":
        body, flagged = _run_evolve(cfg)
    else:
        body, flagged = _run_trace(cfg, out, workers)
    report = {"config": cfg, "status": "flagged" if flagged else "clean", **body,
              "versions": versions()}
    _finite_json({k: v for k, v in report.items() if k != "lines"})
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    try:
        (out / "report.json").write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {out / 'report.json'}: {exc.strerror}") from exc
    return report, EXIT_FLAGGED if flagged else EXIT_CLEAN
