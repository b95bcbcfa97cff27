"""Staggered-grid (Yee) evolution of Maxwell's equations in Hamiltonian form,

    dE/dt = c^2 curl B - j / eps0,      dB/dt = -curl E,

on a periodic box, with energy and Poynting-theorem bookkeeping.

Layout: E_x sits at ((i+1/2)h, jh, kh), E_y at (ih, (j+1/2)h, kh), E_z at
(ih, jh, (k+1/2)h); B_x at (ih, (j+1/2)h, (k+1/2)h) and cyclically. The curl
taking E to B uses forward differences and the one taking B to E backward
differences, so each is the transpose of the other. A 2-D grid is the same
arrays with a single cell along z, which makes every z-derivative vanish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .modes import SI, PhysicalConstants

__all__ = [
    "GridSpec",
    "FieldState",
    "SourceCurrent",
    "GaussianSource",
    "curl_E",
    "curl_B",
    "step",
    "total_energy",
    "poynting_residual",
    "PoyntingResidual",
    "evolve",
    "plane_wave_state",
    "plane_wave_exact",
    "positions",
]

# half-cell offsets of each component, in units of h
_E_OFFSETS = ((0.5, 0, 0), (0, 0.5, 0), (0, 0, 0.5))
_B_OFFSETS = ((0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0))


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid with ``cells`` cells per active axis.

    ``dims == 2`` means a single cell along z; volumes are then per metre
    of z-extent.
    """

    dims: int
    cells: int
    h: float
    dt: float
    steps: int = 0
    consts: PhysicalConstants = field(default=SI, repr=False)

    def __post_init__(self):
        problems = []
        if self.dims not in (2, 3):
            problems.append(f"dims must be 2 or 3, got {self.dims}")
        if int(self.cells) != self.cells or self.cells < 8:
            problems.append(f"cells must be an integer >= 8, got {self.cells}")
        if not self.h > 0:
            problems.append(f"h must be > 0, got {self.h}")
        if not self.dt > 0:
            problems.append(f"dt must be > 0, got {self.dt}")
        elif self.dims in (2, 3) and self.h > 0 and not self.consts.c * self.dt < self.h / np.sqrt(self.dims):
            problems.append(f"CFL violated: c*dt = {self.consts.c * self.dt:.6g} must be < "
                            f"h/sqrt({self.dims}) = {self.h / np.sqrt(self.dims):.6g}")
        if int(self.steps) != self.steps or self.steps < 0:
            problems.append(f"steps must be a non-negative integer, got {self.steps}")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_cfl(cls, dims, cells, h, cfl=0.5, steps=0, consts=SI):
        """Grid whose time step is ``cfl`` times the stability limit."""
        return cls(dims, cells, h, cfl * h / (consts.c * np.sqrt(dims)), steps, consts)

    @property
    def shape(self):
        n = int(self.cells)
        return (n, n, 1) if self.dims == 2 else (n, n, n)

    @property
    def length(self):
        return self.cells * self.h

    @property
    def cell_volume(self):
        return self.h**self.dims

    @property
    def cfl(self):
        return self.consts.c * self.dt * np.sqrt(self.dims) / self.h


@dataclass(frozen=True)
class FieldState:
    """E and B arrays of shape ``(3,) + spec.shape`` at step ``n`` / time ``t``."""

    E: np.ndarray
    B: np.ndarray
    n: int = 0
    t: float = 0.0

    @classmethod
    def zeros(cls, spec: GridSpec):
        return cls(np.zeros((3,) + spec.shape), np.zeros((3,) + spec.shape))


class SourceCurrent:
    """Current density j(x, y, z, t) in A/m^2.

    Subclasses implement ``__call__(x, y, z, t)`` returning a 3-tuple of
    arrays; evaluation happens at each E component's own position.
    """

    def __call__(self, x, y, z, t):
        raise NotImplementedError

    def on_grid(self, spec: GridSpec, t):
        out = np.empty((3,) + spec.shape)
        for a in range(3):
            out[a] = self(*positions(spec, _E_OFFSETS[a]), t)[a]
        return out

    def at_centres(self, spec: GridSpec, t):
        return np.stack(self(*positions(spec, (0.5, 0.5, 0.5)), t))


@dataclass(frozen=True)
class GaussianSource(SourceCurrent):
    """Localized oscillating current ``amplitude * exp(-|r-r0|^2/width^2) sin(omega t)``
    along ``direction``, with r - r0 taken as the minimum image in the periodic box.
    """

    centre: tuple
    width: float
    amplitude: float
    omega: float
    box: float
    direction: tuple = (0.0, 0.0, 1.0)
    planar: bool = True

    def __call__(self, x, y, z, t):
        d2 = 0.0
        for i, coord in enumerate((x, y) if self.planar else (x, y, z)):
            d = coord - self.centre[i]
            d = d - self.box * np.round(d / self.box)
            d2 = d2 + d**2
        g = self.amplitude * np.exp(-d2 / self.width**2) * np.sin(self.omega * t)
        g = np.broadcast_to(g, np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))
        return tuple(c * g for c in self.direction)


def positions(spec: GridSpec, offset):
    """Coordinates (X, Y, Z) of grid points shifted by ``offset`` cells."""
    axes = [(np.arange(n) + o) * spec.h for n, o in zip(spec.shape, offset)]
    return np.meshgrid(*axes, indexing="ij")


def _dfwd(f, axis, h):
    return (np.roll(f, -1, axis=axis) - f) / h


def _dbwd(f, axis, h):
    return (f - np.roll(f, 1, axis=axis)) / h


def curl_E(E, h):
    """Forward-difference curl, mapping E locations onto B locations."""
    return np.stack([_dfwd(E[2], 1, h) - _dfwd(E[1], 2, h),
                     _dfwd(E[0], 2, h) - _dfwd(E[2], 0, h),
                     _dfwd(E[1], 0, h) - _dfwd(E[0], 1, h)])


def curl_B(B, h):
    """Backward-difference curl, mapping B locations onto E locations."""
    return np.stack([_dbwd(B[2], 1, h) - _dbwd(B[1], 2, h),
                     _dbwd(B[0], 2, h) - _dbwd(B[2], 0, h),
                     _dbwd(B[1], 0, h) - _dbwd(B[0], 1, h)])


def step(state: FieldState, spec: GridSpec, src: SourceCurrent | None = None, *, reverse=False):
    """Advance one leapfrog step: B half step, E full step, B half step.

    With ``reverse=True`` the step is taken with -dt, which undoes a forward
    step exactly up to round-off. The source is evaluated at the mid-step time.
    """
    c = spec.consts
    dt = -spec.dt if reverse else spec.dt
    B = state.B - 0.5 * dt * curl_E(state.E, spec.h)
    dE = c.c**2 * curl_B(B, spec.h)
    if src is not None:
        dE = dE - src.on_grid(spec, state.t + 0.5 * dt) / c.eps0
    E = state.E + dt * dE
    B = B - 0.5 * dt * curl_E(E, spec.h)
    return FieldState(E, B, state.n + (-1 if reverse else 1), state.t + dt)


def total_energy(state: FieldState, spec: GridSpec, consts: PhysicalConstants | None = None):
    """Field energy ``sum (eps0 E^2 + B^2 / mu0) / 2 * cell volume`` in J (J/m in 2-D)."""
    c = consts or spec.consts
    return 0.5 * (c.eps0 * np.sum(state.E**2) + np.sum(state.B**2) / c.mu0) * spec.cell_volume


def _work(E0, E1, spec, src, t_mid):
    # E.j dV dt with E averaged over the step and j at the midpoint
    j = src.on_grid(spec, t_mid)
    return float(np.sum(0.5 * (E0 + E1) * j) * spec.cell_volume * spec.dt)


def evolve(state: FieldState, spec: GridSpec, src: SourceCurrent | None = None, steps=None,
           *, keep_every=0):
    """Run ``steps`` (default ``spec.steps``) forward steps with bookkeeping.

    Returns the final state and a report dict holding per-step energies, the
    cumulative work done on the current (``W_n = sum E.j dV dt``), the
    free-field drift ``max |U_n - U_0| / U_0`` and the balance drift
    ``max |U_n - U_0 + W_n| / max(U)``. With ``keep_every > 0`` every such
    state is also returned under ``"states"``.
    """
    steps = spec.steps if steps is None else steps
    energy = [total_energy(state, spec)]
    work = [0.0]
    kept = [state] if keep_every else []
    for i in range(steps):
        new = step(state, spec, src)
        if src is not None:
            work.append(work[-1] + _work(state.E, new.E, spec, src, state.t + 0.5 * spec.dt))
        else:
            work.append(0.0)
        energy.append(total_energy(new, spec))
        state = new
        if keep_every and (i + 1) % keep_every == 0:
            kept.append(state)
    U = np.asarray(energy)
    W = np.asarray(work)
    scale = float(np.max(np.abs(U))) or 1.0
    report = {
        "steps": steps,
        "dt": spec.dt,
        "cfl": spec.cfl,
        "energy": U.tolist(),
        "work": W.tolist(),
        "energy_drift": float(np.max(np.abs(U - U[0])) / U[0]) if U[0] > 0 else float("nan"),
        "balance_drift": float(np.max(np.abs(U - U[0] + W)) / scale),
    }
    if keep_every:
        report["states"] = kept
    return state, report


def _to_centres(F, offsets):
    # average each component onto cell centres (i+1/2, j+1/2, k+1/2)
    out = np.empty_like(F)
    for a in range(3):
        f = F[a]
        for axis, o in enumerate(offsets[a]):
            if o == 0:
                f = 0.5 * (f + np.roll(f, -1, axis=axis))
        out[a] = f
    return out


def _density(Ec, Bc, c):
    return 0.5 * (c.eps0 * np.sum(Ec**2, axis=0) + np.sum(Bc**2, axis=0) / c.mu0)


@dataclass
class PoyntingResidual:
    """Residual of d(rho)/dt + div S + E.j at cell centres, one field per step pair."""

    fields: np.ndarray
    max: float
    l2: float


def poynting_residual(history, spec: GridSpec, src: SourceCurrent | None = None,
                      consts: PhysicalConstants | None = None):
    """Pointwise Poynting-theorem residual between consecutive states.

    For each pair (n, n+1) the residual is evaluated at t_{n+1/2} on cell
    centres: centred time difference of the energy density, central-difference
    divergence of S built from the step-averaged fields, and E.j. ``l2`` is
    the root of the cell-volume-weighted sum of squares, averaged over pairs.
    """
    c = consts or spec.consts
    history = list(history)
    if len(history) < 2:
        raise ValueError("poynting_residual needs at least two consecutive states")
    shape = (3,) + spec.shape
    out = []
    for a, b in zip(history[:-1], history[1:]):
        if a.E.shape != shape or b.E.shape != shape:
            raise ValueError(f"state arrays do not match the grid spec {shape}")
        if b.n - a.n != 1:
            raise ValueError("states must be consecutive steps")
        Ea, Ba = _to_centres(a.E, _E_OFFSETS), _to_centres(a.B, _B_OFFSETS)
        Eb, Bb = _to_centres(b.E, _E_OFFSETS), _to_centres(b.B, _B_OFFSETS)
        drho = (_density(Eb, Bb, c) - _density(Ea, Ba, c)) / spec.dt
        Em, Bm = 0.5 * (Ea + Eb), 0.5 * (Ba + Bb)
        S = np.cross(Em, Bm, axis=0) / c.mu0
        div = sum((np.roll(S[ax], -1, axis=ax) - np.roll(S[ax], 1, axis=ax)) / (2 * spec.h)
                  for ax in range(3))
        r = drho + div
        if src is not None:
            r = r + np.sum(Em * src.at_centres(spec, 0.5 * (a.t + b.t)), axis=0)
        out.append(r)
    fields = np.array(out)
    l2 = float(np.sqrt(np.mean(np.sum(fields**2, axis=(1, 2, 3)) * spec.cell_volume)))
    return PoyntingResidual(fields, float(np.max(np.abs(fields))), l2)


def _mode_vectors(spec, mode, polarization, lattice=False):
    k = 2 * np.pi * np.asarray(mode, dtype=float) / spec.length
    if np.linalg.norm(k) == 0:
        raise ValueError("plane-wave mode must be nonzero")
    if spec.dims == 2 and k[2] != 0:
        raise ValueError("a 2-D grid has no z-variation; mode[2] must be 0")
    direction = 2 / spec.h * np.sin(k * spec.h / 2) if lattice else k
    khat = direction / np.linalg.norm(direction)
    if polarization is None:
        polarization = (0.0, 0.0, 1.0) if khat[2] == 0 else (1.0, 0.0, 0.0)
    p = np.asarray(polarization, dtype=float)
    p = p - khat * (p @ khat)
    if np.linalg.norm(p) == 0:
        raise ValueError("polarization must not be parallel to the wave vector")
    p /= np.linalg.norm(p)
    return k, khat, p, np.cross(khat, p)


def plane_wave_exact(spec: GridSpec, t, mode=(1, 0, 0), amplitude=1.0, polarization=None):
    """Analytic travelling wave E = E0 p cos(k.x - c|k| t), B = (k_hat x E)/c sampled
    at the staggered component positions. ``mode`` counts wavelengths per box edge.
    """
    k, khat, p, q = _mode_vectors(spec, mode, polarization)
    w = spec.consts.c * np.linalg.norm(k)
    E = np.empty((3,) + spec.shape)
    B = np.empty((3,) + spec.shape)
    for a in range(3):
        X, Y, Z = positions(spec, _E_OFFSETS[a])
        E[a] = amplitude * p[a] * np.cos(k[0] * X + k[1] * Y + k[2] * Z - w * t)
        X, Y, Z = positions(spec, _B_OFFSETS[a])
        B[a] = amplitude / spec.consts.c * q[a] * np.cos(k[0] * X + k[1] * Y + k[2] * Z - w * t)
    return FieldState(E, B, 0, t)


def plane_wave_state(spec: GridSpec, mode=(1, 0, 0), amplitude=1.0, polarization=None):
    """The lattice's own travelling plane wave for ``mode``.

    The difference operators act on a staggered plane wave like a continuum
    curl with wavenumbers ``(2/h) sin(k h / 2)``. Diagonalizing one leapfrog
    step for that symbol gives the forward eigenmode, whose B/E ratio differs
    from 1/c by O((kh)^2). Starting from it the wave propagates without
    exciting a backward partner, so its energy is constant to round-off.
    """
    k, khat, p, q = _mode_vectors(spec, mode, polarization, lattice=True)
    c, h, dt = spec.consts.c, spec.h, spec.dt
    kappa = np.linalg.norm(2 / h * np.sin(k * h / 2))
    # one step on amplitudes (e, b) of E = e p, B = b q
    half_b = np.array([[1, 0], [-0.5j * dt * kappa, 1]])
    full_e = np.array([[1, -1j * dt * c**2 * kappa], [0, 1]])
    M = half_b @ full_e @ half_b
    vals, vecs = np.linalg.eig(M)
    fwd = int(np.argmin(np.angle(vals)))          # exp(-i Omega dt), Omega > 0
    e, b = vecs[:, fwd] / vecs[0, fwd]
    E = np.empty((3,) + spec.shape)
    B = np.empty((3,) + spec.shape)
    for a in range(3):
        X, Y, Z = positions(spec, _E_OFFSETS[a])
        E[a] = amplitude * p[a] * np.real(e * np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z)))
        X, Y, Z = positions(spec, _B_OFFSETS[a])
        B[a] = amplitude * q[a] * np.real(b * np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z)))
    return FieldState(E, B, 0, 0.0)
