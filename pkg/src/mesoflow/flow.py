"""Energy-flow lines of the Poynting field under the interpolating dynamics
``dr/dt = S / rho_mes``.

Two parametrizations are offered. Geometric traces follow the unit tangent
of the flow velocity and so reproduce its path shape; timed traces integrate
the velocity itself and record transit times. Both stop on leaving the
domain, at stagnation (|S| below the field's floor), at nodes where the
quantum potential is undefined, and where rho_mes stops being positive.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.interpolate import CubicSpline

from .emfield import FlowSample
from .errors import DegenerateDensityError, DomainError, MesoflowError, NodeError, VerticalTangent
from .numerics import StepControl, rk4_step

__all__ = [
    "TERMINALS",
    "FlowLine",
    "SeedSpec",
    "VectorField",
    "slope",
    "trace_geometric",
    "trace_timed",
    "matched_arc_deviation",
    "SweepResult",
    "sweep_coupling",
]

TERMINALS = ("domain-exit", "max-steps", "stagnation", "node", "reversal")


@dataclass
class FlowLine:
    """One traced line. Per-point arrays share the length of ``points``.

    ``Q`` is reported as 0 (and ``rho_mes`` as ``rho_cl``) only at a seed
    where the quantum potential is undefined; such lines end as
    ``node`` or ``stagnation`` at the seed.
    """

    seed: np.ndarray
    points: np.ndarray
    arc_s: np.ndarray
    time_t: np.ndarray
    S: np.ndarray
    rho_cl: np.ndarray
    Q: np.ndarray
    rho_mes: np.ndarray
    terminal: str
    mode: str = "geometric"
    coupling: float | None = None

    def __len__(self):
        return len(self.points)

    @property
    def speed(self):
        return np.linalg.norm(self.S, axis=-1) / self.rho_mes


@dataclass(frozen=True)
class SeedSpec:
    """``count`` seeds evenly spaced from ``start`` to ``end`` inclusive."""

    start: tuple
    end: tuple
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"seed count must be an integer >= 1, got {self.count}")
        if len(self.start) != 3 or len(self.end) != 3:
            raise ValueError("seed start and end must be 3-vectors")

    def points(self):
        if self.count == 1:
            return np.asarray(self.start, dtype=float)[None, :]
        return np.linspace(np.asarray(self.start, float), np.asarray(self.end, float), int(self.count))


class VectorField:
    """Adapter turning a plain vector function into a flow field.

    Densities are uniform (``rho_cl = rho_mes = rho``, Q = 0), so the flow
    velocity is ``S / rho``. Mostly useful for synthetic tests.
    """

    def __init__(self, func, rho=1.0, stagnation_floor=0.0):
        self.func = func
        self.rho = rho
        self.stagnation_floor = stagnation_floor

    def sample(self, r):
        return FlowSample(np.asarray(self.func(np.asarray(r, dtype=float)), dtype=float),
                          self.rho, 0.0, self.rho)


def slope(Sx, Sy):
    """Flow-line slope dy/dx = S_y / S_x in a 2-D scene."""
    if Sx == 0:
        raise VerticalTangent("S_x vanishes: the tangent is vertical, trace in arc length instead")
    return Sy / Sx


class _Stop(Exception):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class _Sampler:
    """Checked field sampling with a one-entry cache (RK4 re-asks for the last point)."""

    def __init__(self, fld, bounds, floor):
        self.field = fld
        self.floor = floor
        self.bounds = bounds
        self._key = None
        self._val = None

    def __call__(self, r) -> FlowSample:
        key = r.tobytes()
        if key == self._key:
            return self._val
        if self.bounds is not None and (np.any(r < self.bounds[0]) or np.any(r > self.bounds[1])):
            raise _Stop("domain-exit")
        try:
            smp = self.field.sample(r)
        except NodeError:
            raise _Stop("node") from None
        except DomainError:
            raise _Stop("domain-exit") from None
        if not np.all(np.isfinite(smp.S)) or not np.isfinite(smp.rho_mes):
            raise MesoflowError(f"non-finite field sample at {r.tolist()}")
        if np.linalg.norm(smp.S) < self.floor:
            raise _Stop("stagnation")
        if smp.rho_mes <= 0:
            raise _Stop("reversal")
        self._key, self._val = key, smp
        return smp


def _seed_sample(fld, seed):
    # Densities at the seed when it may be a node; Q falls back to 0 there.
    try:
        return fld.sample(seed), None
    except NodeError:
        pass
    S = np.asarray(fld.poynting(seed), dtype=float)
    rho = float(fld.classical_density(seed))
    return FlowSample(S, rho, 0.0, rho), "node"


def _trace(fld, seed, ctl: StepControl, *, timed, bounds=None, coupling=None):
    seed = np.asarray(seed, dtype=float)
    if bounds is not None:
        bounds = tuple(np.asarray(b, dtype=float) for b in bounds)
    floor = getattr(fld, "stagnation_floor", 0.0)
    smp0, seed_issue = _seed_sample(fld, seed)
    mode = "timed" if timed else "geometric"

    def single(terminal):
        return FlowLine(seed, seed[None, :].copy(), np.zeros(1), np.zeros(1), smp0.S[None, :].copy(),
                        np.array([smp0.rho_cl]), np.array([smp0.Q]), np.array([smp0.rho_mes]),
                        terminal, mode, coupling)

    if np.linalg.norm(smp0.S) < floor:
        return single("stagnation")
    if seed_issue:
        return single(seed_issue)
    if bounds is not None and (np.any(seed < bounds[0]) or np.any(seed > bounds[1])):
        return single("domain-exit")
    if smp0.rho_mes == 0:
        if timed:
            raise DegenerateDensityError(f"rho_mes vanishes at the seed {seed.tolist()}")
        return single("reversal")
    if smp0.rho_mes < 0:
        return single("reversal")

    sampler = _Sampler(fld, bounds, floor)
    sampler._key, sampler._val = seed.tobytes(), smp0

    def tangent(r):
        v = sampler(r).velocity
        return v if timed else v / np.linalg.norm(v)

    pts, smps, s, t = [seed], [smp0], [0.0], [0.0]
    r, cur = seed, smp0
    finest = max(ctl.min_step, ctl.rel_tol * ctl.initial_step)
    h = ctl.initial_step
    terminal = "max-steps"
    for _ in range(ctl.max_steps):
        failed = None
        while True:
            try:
                if timed:
                    dt = h / np.linalg.norm(cur.velocity)
                    r_new = rk4_step(tangent, r, dt)
                else:
                    r_new = rk4_step(tangent, r, h)
                chord = float(np.linalg.norm(r_new - r))
                if chord > ctl.max_step:
                    raise _Stop("max-steps")
                new = sampler(r_new)
                break
            except _Stop as stop:
                h *= 0.5
                if h < finest:
                    failed = stop.reason
                    break
        if failed:
            terminal = failed
            break
        if chord == 0.0:
            terminal = "stagnation"
            break
        if timed:
            t.append(t[-1] + dt)
            s.append(s[-1] + chord)
        else:
            s.append(s[-1] + h)
            t.append(t[-1] + 0.5 * h * (1 / np.linalg.norm(cur.velocity) + 1 / np.linalg.norm(new.velocity)))
        pts.append(r_new)
        smps.append(new)
        r, cur = r_new, new
        h = min(ctl.initial_step, 2 * h)
    else:
        terminal = "max-steps"

    return FlowLine(
        seed=seed,
        points=np.array(pts),
        arc_s=np.array(s),
        time_t=np.array(t),
        S=np.array([m.S for m in smps]),
        rho_cl=np.array([m.rho_cl for m in smps]),
        Q=np.array([m.Q for m in smps]),
        rho_mes=np.array([m.rho_mes for m in smps]),
        terminal=terminal,
        mode=mode,
        coupling=coupling,
    )


def trace_geometric(fld, seed, ctl: StepControl, *, bounds=None):
    """Trace the path shape of the flow through ``seed``.

    Integrates ``dr/ds = v / |v|`` with ``v = S / rho_mes``, so ``s`` is arc
    length. Wherever rho_mes > 0 this is the unit tangent of S and the path is
    that of the timed flow. ``bounds`` is an optional ``(lo, hi)`` pair of
    3-vectors delimiting the domain.
    """
    return _trace(fld, seed, ctl, timed=False, bounds=bounds,
                  coupling=getattr(getattr(fld, "meso", None), "coupling", None))


def trace_timed(fld, seed, ctl: StepControl, *, bounds=None):
    """Integrate ``dr/dt = S / rho_mes`` literally, recording transit time.

    Each time step is sized so the spatial advance is about
    ``ctl.initial_step``. A seed with rho_mes == 0 raises
    :class:`~mesoflow.errors.DegenerateDensityError`.
    """
    return _trace(fld, seed, ctl, timed=True, bounds=bounds,
                  coupling=getattr(getattr(fld, "meso", None), "coupling", None))


def _interp(line, s):
    if len(line) == 1:
        return np.repeat(line.points, len(s), axis=0)
    if len(line) == 2:
        f = (s - line.arc_s[0]) / (line.arc_s[1] - line.arc_s[0])
        return line.points[0] + f[:, None] * (line.points[1] - line.points[0])
    return CubicSpline(line.arc_s, line.points, axis=0)(s)


def matched_arc_deviation(a: FlowLine, b: FlowLine):
    """Largest distance between two lines compared at equal arc length.

    Only the arc range both lines cover is compared; positions between
    samples come from cubic-spline interpolation in arc length.
    """
    common = min(a.arc_s[-1], b.arc_s[-1])
    dev = 0.0
    for x, y in ((a, b), (b, a)):
        s = x.arc_s[x.arc_s <= common]
        if len(s):
            dev = max(dev, float(np.max(np.linalg.norm(x.points[:len(s)] - _interp(y, s), axis=-1))))
    return dev


@dataclass
class SweepResult:
    """Traces for every (coupling, seed) pair plus path-deviation metrics.

    ``lines[i][j]`` is the trace for ``couplings[i]`` from seed ``j``, or
    None when that trace failed; the failure message is then in
    ``errors[(i, j)]``.
    """

    couplings: list
    seeds: np.ndarray
    mode: str
    lines: list
    errors: dict = field(default_factory=dict)
    deviations: list = field(default_factory=list)

    @property
    def max_path_deviation(self):
        return max((d["deviation"] for d in self.deviations), default=0.0)


def _trace_task(args):
    fld, seed, ctl, mode, bounds = args
    try:
        if mode == "timed":
            return trace_timed(fld, seed, ctl, bounds=bounds), None
        return trace_geometric(fld, seed, ctl, bounds=bounds), None
    except MesoflowError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def default_workers():
    env = os.environ.get("MESOFLOW_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


def sweep_coupling(fld, seeds, couplings, ctl: StepControl, *, mode="geometric", bounds=None,
                   workers=1):
    """Trace the same seeds at each coupling and measure path deviations.

    ``fld`` must offer ``with_coupling``. Deviations are reported for every
    pair of couplings at every seed where both traces exist. Output order is
    fixed by the inputs regardless of ``workers``.
    """
    if mode not in ("geometric", "timed"):
        raise ValueError(f"mode must be 'geometric' or 'timed', got {mode!r}")
    couplings = [float(c) for c in couplings]
    for c in couplings:
        if not 0 <= c <= 1:
            raise ValueError(f"couplings must lie in [0, 1], got {c}")
    seed_pts = seeds.points() if isinstance(seeds, SeedSpec) else np.atleast_2d(np.asarray(seeds, float))
    tasks = [(fld.with_coupling(c), sp, ctl, mode, bounds) for c in couplings for sp in seed_pts]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trace_task, tasks, chunksize=1))
    else:
        results = [_trace_task(t) for t in tasks]

    ns = len(seed_pts)
    out = SweepResult(couplings, seed_pts, mode, [[None] * ns for _ in couplings])
    for idx, (line, err) in enumerate(results):
        i, j = divmod(idx, ns)
        out.lines[i][j] = line
        if err is not None:
            out.errors[(i, j)] = err
    for j in range(ns):
        for i1, i2 in combinations(range(len(couplings)), 2):
            a, b = out.lines[i1][j], out.lines[i2][j]
            if a is None or b is None:
                continue
            out.deviations.append({"seed": j, "couplings": (couplings[i1], couplings[i2]),
                                   "deviation": matched_arc_deviation(a, b)})
    return out
