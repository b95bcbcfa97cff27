"""Scene configuration: TOML/JSON loading, presets, defaults and validation.

Values are SI. A configuration is resolved in three layers, each overriding
the last: preset, file, command-line flags. Validation collects every
problem before raising a single :class:`~mesoflow.errors.ConfigError`.
"""

from __future__ import annotations

import copy
import json
import math
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

KINDS = ("grating", "double-slit", "lg", "evolve")
MODES = ("geometric", "timed", "both")

_num = (int, float)
_vec = "vec3"

# section -> key -> accepted type
SCHEMA = {
    "": {"kind": str, "mode": str, "couplings": list, "out": str, "preset": str},
    "grating": {"wavelength": _num, "period": _num, "duty": _num, "orders": int,
                "amp_A": _num, "amp_B": _num, "sign_branch": str},
    "lg": {"p": int, "l": int, "w0": _num, "wavelength": _num, "amplitude": _num},
    "evolve": {"dims": int, "cells": int, "length": _num, "cfl": _num, "periods": _num,
               "mode": list, "amplitude": _num, "source": bool, "source_amplitude": _num,
               "source_width": _num},
    "meso": {"q_scale": _num, "reduction": str, "rho_ref": _num, "amp_floor": _num},
    "seeds": {"start": _vec, "end": _vec, "count": int},
    "trace": {"steps_per_scale": _num, "max_steps": int, "rel_tol": _num,
              "bounds_lo": _vec, "bounds_hi": _vec},
    "density_map": {"lo": _vec, "hi": _vec, "nx": int, "ny": int},
}

HENE = 632.8e-9


def _grating_defaults(lam, period, window_periods):
    return {
        "grating": {"wavelength": lam, "period": period, "duty": 0.5, "orders": 10,
                    "amp_A": 1.0, "amp_B": 0.0, "sign_branch": "upper"},
        "seeds": {"start": [-window_periods * period / 2, lam, 0.0],
                  "end": [window_periods * period / 2, lam, 0.0], "count": 21},
        "trace": {"steps_per_scale": 50, "max_steps": 2000, "rel_tol": 1e-8,
                  "bounds_lo": [-3 * period, 0.0, -1.0], "bounds_hi": [3 * period, 20 * lam, 1.0]},
        "density_map": {"lo": [-period, lam, 0.0], "hi": [period, 20 * lam, 0.0], "nx": 41, "ny": 41},
    }


def _lg_defaults(lam, w0, p, l):
    zr = math.pi * w0**2 / lam
    return {
        "lg": {"p": p, "l": l, "w0": w0, "wavelength": lam, "amplitude": 1.0},
        "seeds": {"start": [0.25 * w0, 0.0, -0.25 * zr], "end": [1.5 * w0, 0.0, -0.25 * zr],
                  "count": 11},
        "trace": {"steps_per_scale": 10, "max_steps": 2000, "rel_tol": 1e-8,
                  "bounds_lo": [-6 * w0, -6 * w0, -0.25 * zr], "bounds_hi": [6 * w0, 6 * w0, 0.25 * zr]},
        "density_map": {"lo": [-2.5 * w0, -2.5 * w0, 0.0], "hi": [2.5 * w0, 2.5 * w0, 0.0],
                        "nx": 40, "ny": 40},
    }


def _evolve_defaults():
    return {"evolve": {"dims": 2, "cells": 64, "length": 1e-6, "cfl": 0.5, "periods": 10,
                       "mode": [1, 0, 0], "amplitude": 1.0, "source": False,
                       "source_amplitude": 1e6, "source_width": 0.1}}


def _base(kind, couplings):
    return {"kind": kind, "mode": "both", "couplings": couplings, "out": "mesoflow-out",
            "meso": {"q_scale": 1.0, "reduction": "3d", "amp_floor": 1e-12}}


def preset(name):
    """Fully populated configuration for a canned scene."""
    if name == "double-slit":
        cfg = _base("double-slit", [0.0, 1.0])
        cfg.update(_grating_defaults(HENE, 5 * HENE, 2))
    elif name == "ronchi":
        cfg = _base("grating", [0.0, 0.25, 0.5, 0.75, 1.0])
        cfg.update(_grating_defaults(HENE, 5 * HENE, 1))
    elif name == "lg-donut":
        cfg = _base("lg", [0.0, 1.0])
        cfg.update(_lg_defaults(HENE, 100 * HENE / (2 * math.pi), 0, 2))
    elif name == "plane-wave":
        cfg = _base("evolve", [1.0])
        cfg.update(_evolve_defaults())
    else:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg["preset"] = name
    return cfg


PRESETS = ("double-slit", "ronchi", "lg-donut", "plane-wave")
_KIND_PRESET = {"grating": "ronchi", "double-slit": "double-slit", "lg": "lg-donut",
                "evolve": "plane-wave"}


def load_file(path):
    """Read a TOML config, a JSON config, or a run's report.json (its ``config``)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            if "config" in data and isinstance(data["config"], dict):
                data = data["config"]
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return data


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _check_types(data, problems):
    for key, val in data.items():
        if isinstance(val, dict):
            if key not in SCHEMA or key == "":
                problems.append(f"unknown section [{key}]")
                continue
            for sub, v in val.items():
                _check_value(f"{key}.{sub}", SCHEMA[key].get(sub), v, problems)
        else:
            _check_value(key, SCHEMA[""].get(key), val, problems)


def _check_value(name, kind, v, problems):
    if kind is None:
        problems.append(f"unknown key {name!r}")
    elif kind == _vec:
        if not (isinstance(v, list) and len(v) == 3
                and all(isinstance(x, _num) and not isinstance(x, bool) for x in v)):
            problems.append(f"{name} must be a list of 3 numbers, got {v!r}")
    elif kind is int:
        if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
            problems.append(f"{name} must be an integer, got {v!r}")
    elif kind == _num:
        if isinstance(v, bool) or not isinstance(v, _num) or not math.isfinite(v):
            problems.append(f"{name} must be a finite number, got {v!r}")
    elif not isinstance(v, kind):
        problems.append(f"{name} must be of type {kind.__name__}, got {v!r}")


def resolve(file_data=None, *, preset_name=None, overrides=None):
    """Layer preset, file and overrides into one validated config dict.

    The kind decides which preset supplies defaults when none is named.
    """
    file_data = file_data or {}
    overrides = overrides or {}
    problems = []
    name = preset_name or overrides.get("preset") or file_data.get("preset")
    kind = overrides.get("kind") or file_data.get("kind")
    if name is None:
        if kind is None:
            problems.append("config needs a 'kind' (one of " + ", ".join(KINDS) + ") or a preset")
            raise ConfigError(problems)
        if kind not in KINDS:
            problems.append(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
            raise ConfigError(problems)
        name = _KIND_PRESET[kind]
    if name not in PRESETS:
        problems.append(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        raise ConfigError(problems)
    cfg = _merge(preset(name), file_data)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    cfg["preset"] = name
    if kind is not None and "kind" not in file_data and "kind" not in overrides:
        cfg["kind"] = kind
    _check_types(cfg, problems)
    try:
        _check_semantics(cfg, problems)
    except (TypeError, KeyError, AttributeError) as exc:
        # malformed tables already reported above; stop short of cascading errors
        problems.append(f"malformed configuration: {exc}")
    if problems:
        raise ConfigError(list(dict.fromkeys(problems)))
    return cfg


def _known(cfg, section):
    val = cfg.get(section)
    if not isinstance(val, dict):
        raise TypeError(f"[{section}] must be a table")
    return {k: v for k, v in val.items() if k in SCHEMA[section]}


def _check_semantics(cfg, problems):
    # Domain objects validate their own invariants; errors from all of them are pooled.
    from .emfield import MesoParams
    from .evolver import GridSpec
    from .flow import SeedSpec
    from .modes import GratingScene, LGScene
    from .numerics import StepControl

    kind = cfg.get("kind")
    if kind not in KINDS:
        problems.append(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
        return
    if cfg.get("mode") not in MODES:
        problems.append(f"mode must be one of {', '.join(MODES)}, got {cfg.get('mode')!r}")
    cps = cfg.get("couplings")
    if not isinstance(cps, list) or not cps:
        problems.append("couplings must be a non-empty list")
    else:
        for c in cps:
            if isinstance(c, bool) or not isinstance(c, _num) or not 0 <= c <= 1:
                problems.append(f"each coupling must be a number in [0, 1], got {c!r}")

    def attempt(label, fn):
        try:
            return fn()
        except ValueError as exc:
            for part in str(exc).replace("invalid configuration:\n  - ", "").split("\n  - "):
                for item in part.split("; "):
                    problems.append(f"{label}: {item}")
        except TypeError as exc:
            problems.append(f"{label}: {exc}")
        return None

    if kind in ("grating", "double-slit"):
        attempt("grating", lambda: GratingScene(**_known(cfg, "grating")))
    elif kind == "lg":
        attempt("lg", lambda: LGScene(**_known(cfg, "lg")))
    if kind == "evolve":
        ev = cfg["evolve"]
        for key in ("length", "periods", "cfl"):
            if isinstance(ev.get(key), _num) and not ev[key] > 0:
                problems.append(f"evolve.{key} must be > 0, got {ev[key]}")
        if isinstance(ev.get("cfl"), _num) and not ev["cfl"] < 1:
            problems.append(f"evolve.cfl must be < 1 for stability, got {ev['cfl']}")
        mode = ev.get("mode")
        if not (isinstance(mode, list) and len(mode) == 3 and all(isinstance(m, int) for m in mode)):
            problems.append(f"evolve.mode must be a list of 3 integers, got {mode!r}")
        elif ev.get("dims") == 2 and mode[2] != 0:
            problems.append("evolve.mode[2] must be 0 on a 2-D grid")
        elif not any(mode):
            problems.append("evolve.mode must be nonzero")
        if all(isinstance(ev.get(k), _num) and ev.get(k) > 0 for k in ("length", "cells")):
            # a bad cfl is reported above; check the rest of the grid at a stable one
            cfl = ev["cfl"] if isinstance(ev.get("cfl"), _num) and 0 < ev["cfl"] < 1 else 0.5
            attempt("evolve", lambda: GridSpec.from_cfl(ev["dims"], ev["cells"],
                                                        ev["length"] / ev["cells"], cfl))
        return
    attempt("meso", lambda: MesoParams(**_known(cfg, "meso")))
    attempt("seeds", lambda: SeedSpec(tuple(cfg["seeds"]["start"]), tuple(cfg["seeds"]["end"]),
                                      cfg["seeds"]["count"]))
    tr = cfg["trace"]
    if isinstance(tr.get("steps_per_scale"), _num) and not tr["steps_per_scale"] > 0:
        problems.append(f"trace.steps_per_scale must be > 0, got {tr['steps_per_scale']}")
    else:
        attempt("trace", lambda: StepControl.for_length(1.0, steps_per_scale=tr["steps_per_scale"],
                                                        max_steps=tr["max_steps"], rel_tol=tr["rel_tol"]))
    lo, hi = tr.get("bounds_lo"), tr.get("bounds_hi")
    if isinstance(lo, list) and isinstance(hi, list) and len(lo) == len(hi) == 3 and not all(a < b for a, b in zip(lo, hi)):
        problems.append("trace.bounds_lo must be below trace.bounds_hi on every axis")
    dm = cfg["density_map"]
    if kind in ("grating", "double-slit"):
        if isinstance(dm.get("lo"), list) and dm["lo"][1] < 0:
            problems.append("density_map.lo[1] must be >= 0: the grating field exists only for y >= 0")
    for key in ("nx", "ny"):
        if isinstance(dm.get(key), int) and dm[key] < 1:
            problems.append(f"density_map.{key} must be >= 1, got {dm[key]}")
