"""Shared numerical kernels: RK4 stepping, central finite differences,
Fourier-coefficient quadrature and convergence-order estimates.

The finite-difference helpers call the sampler *once* with an ``(m, 3)``
array of stencil points and expect ``m`` values back, so samplers should be
vectorized over their first axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

__all__ = [
    "StepControl",
    "FDStencil",
    "rk4_step",
    "fd_gradient",
    "fd_laplacian",
    "fourier_coefficient",
    "convergence_orders",
]


@dataclass(frozen=True)
class StepControl:
    """Step-size settings for the flow-line integrators.

    Lengths are in metres. ``rel_tol`` is the fraction of a step to which
    terminal events (boundary exit, density reversal) are localized.
    """

    initial_step: float
    min_step: float
    max_step: float
    rel_tol: float = 1e-8
    max_steps: int = 10_000

    def __post_init__(self):
        problems = []
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            problems.append(
                f"need 0 < min_step <= initial_step <= max_step, got "
                f"{self.min_step}, {self.initial_step}, {self.max_step}")
        if not self.rel_tol > 0:
            problems.append(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.max_steps > 0:
            problems.append(f"max_steps must be > 0, got {self.max_steps}")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def for_length(cls, scale, *, steps_per_scale=50, max_steps=10_000, rel_tol=1e-8):
        """Control whose initial step is ``scale / steps_per_scale``."""
        h = scale / steps_per_scale
        return cls(initial_step=h, min_step=h * 2.0**-20, max_step=2 * h,
                   rel_tol=rel_tol, max_steps=max_steps)


@dataclass(frozen=True)
class FDStencil:
    h: float
    order: int = 2

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"stencil spacing must be > 0, got {self.h}")
        if self.order not in (2, 4):
            raise ValueError(f"stencil order must be 2 or 4, got {self.order}")


def rk4_step(f, y, h):
    """One classical 4th-order Runge-Kutta step of ``dy/dt = f(y)``.

    Raises
    ------
    IntegrationError
        If any stage evaluation is non-finite. ``location`` holds the
        state at which ``f`` was evaluated.
    """
    y = np.asarray(y, dtype=float)

    def _eval(at):
        v = np.asarray(f(at), dtype=float)
        if not np.all(np.isfinite(v)):
            raise IntegrationError(f"non-finite vector field at {at!r}", location=at)
        return v

    k1 = _eval(y)
    k2 = _eval(y + 0.5 * h * k1)
    k3 = _eval(y + 0.5 * h * k2)
    k4 = _eval(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# offsets and weights of the 1-D central stencils
_D1 = {2: ((-1, 1), (-0.5, 0.5)),
       4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12))}
_D2 = {2: ((-1, 1), (1.0, 1.0), -2.0),
       4: ((-2, -1, 1, 2), (-1 / 12, 16 / 12, 16 / 12, -1 / 12), -30 / 12)}


def _sample(g, pts, what):
    vals = np.asarray(g(pts))
    if vals.shape != (len(pts),):
        vals = vals.reshape(len(pts))
    if not np.all(np.isfinite(vals)):
        bad = pts[~np.isfinite(vals)][0]
        raise IntegrationError(f"{what}: non-finite sample at {bad!r}", location=bad)
    return vals


def fd_gradient(g, x, st: FDStencil):
    """Central-difference gradient of a scalar sampler at point ``x``.

    Error is O(h**order). Works for complex-valued samplers as well.
    """
    x = np.asarray(x, dtype=float)
    offsets, weights = _D1[st.order]
    m = len(offsets)
    pts = np.repeat(x[None, :], 3 * m, axis=0)
    for axis in range(3):
        pts[axis * m:(axis + 1) * m, axis] += np.asarray(offsets) * st.h
    vals = _sample(g, pts, "fd_gradient").reshape(3, m)
    return vals @ np.asarray(weights) / st.h


def fd_laplacian(g, x, st: FDStencil, dims="3d"):
    """Central-difference Laplacian of ``g`` at ``x``.

    ``dims`` is ``"3d"`` for all three axes or ``"transverse"`` for x and y
    only.
    """
    if dims == "3d":
        axes = (0, 1, 2)
    elif dims == "transverse":
        axes = (0, 1)
    else:
        raise ValueError(f"dims must be '3d' or 'transverse', got {dims!r}")
    x = np.asarray(x, dtype=float)
    offsets, weights, centre = _D2[st.order]
    m = len(offsets)
    pts = np.repeat(x[None, :], 1 + len(axes) * m, axis=0)
    for i, axis in enumerate(axes):
        pts[1 + i * m:1 + (i + 1) * m, axis] += np.asarray(offsets) * st.h
    vals = _sample(g, pts, "fd_laplacian")
    off = vals[1:].reshape(len(axes), m) @ np.asarray(weights)
    return (off.sum() + len(axes) * centre * vals[0]) / st.h**2


def fourier_coefficient(transmittance, n, *, panels=2**14, breakpoints=()):
    """n-th complex Fourier coefficient of a unit-period function.

    ``c_n = ∫_{-1/2}^{1/2} t(ξ) exp(-2πi n ξ) dξ``, evaluated with a composite
    midpoint rule in which ``t`` is sampled at panel midpoints and the
    exponential is integrated exactly across each panel. When the jumps of a
    piecewise-constant ``t`` are listed in ``breakpoints`` (normalized
    coordinates in [-1/2, 1/2]) the panels are aligned to them and the result
    is exact up to round-off.

    ``transmittance`` is called once with the array of midpoints.
    """
    edges = sorted({-0.5, 0.5, *(float(b) for b in breakpoints if -0.5 < b < 0.5)})
    lengths = np.diff(edges)
    counts = np.maximum(1, np.rint(panels * lengths).astype(int))
    grid = np.concatenate([np.linspace(a, b, c + 1)[:-1] for a, b, c in
                           zip(edges[:-1], edges[1:], counts)] + [[0.5]])
    widths = np.diff(grid)
    mids = 0.5 * (grid[:-1] + grid[1:])
    t = np.asarray(transmittance(mids), dtype=complex)
    if not np.all(np.isfinite(t)):
        raise IntegrationError("fourier_coefficient: non-finite transmittance")
    weights = widths * np.sinc(n * widths) * np.exp(-2j * np.pi * n * mids)
    return complex(np.sum(t * weights))


def convergence_orders(errors, ratio=2.0):
    """Observed orders ``log(e_i / e_{i+1}) / log(ratio)`` for a refinement sequence."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)
