"""Physical E and B fields assembled from the scalar modes, plus the densities
that drive the energy flow: time-averaged Poynting vector, classical energy
density, quantum-potential density Q and the interpolated meso-density.

Complex amplitudes follow exp(-i omega t); time averages use
<X Y> = Re(X Y*) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NodeError
from .modes import SI, GratingScene, LGScene, PhysicalConstants, grating_psi, lg_u_cartesian
from .numerics import FDStencil, fd_gradient, fd_laplacian

__all__ = [
    "EMSample",
    "MesoParams",
    "DensityBreakdown",
    "FlowSample",
    "grating_em",
    "lg_em",
    "poynting_avg",
    "grating_poynting_closed",
    "lg_poynting_closed",
    "cylindrical_to_cartesian",
    "classical_density",
    "quantum_potential",
    "meso_density",
    "GratingField",
    "LGField",
]

REDUCTIONS = {"3d": "3d", "laplacian-3d": "3d",
              "transverse": "transverse", "laplacian-transverse": "transverse"}


@dataclass(frozen=True)
class EMSample:
    """Complex E (V/m) and B (T) phasors; the last axis holds x, y, z."""

    E: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class MesoParams:
    """Coupling and quantum-potential settings.

    coupling is lambda in [0, 1]: 1 is the classical limit, 0 the quantum one.
    Q is normalized as ``-q_scale * rho_ref * lap|u| / (k^2 |u|)``; when
    ``rho_ref`` is None the scene's peak classical density is used.
    ``amp_floor`` is relative to the scene's peak mode amplitude.
    """

    coupling: float = 1.0
    q_scale: float = 1.0
    reduction: str = "3d"
    rho_ref: float | None = None
    amp_floor: float = 1e-12

    def __post_init__(self):
        problems = []
        if not 0 <= self.coupling <= 1:
            problems.append(f"coupling must lie in [0, 1], got {self.coupling}")
        if not self.q_scale >= 0:
            problems.append(f"q_scale must be >= 0, got {self.q_scale}")
        if self.reduction not in REDUCTIONS:
            problems.append(f"reduction must be one of {sorted(REDUCTIONS)}, got {self.reduction!r}")
        if self.rho_ref is not None and not self.rho_ref > 0:
            problems.append(f"rho_ref must be > 0, got {self.rho_ref}")
        if not self.amp_floor >= 0:
            problems.append(f"amp_floor must be >= 0, got {self.amp_floor}")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "reduction", REDUCTIONS[self.reduction])


@dataclass(frozen=True)
class DensityBreakdown:
    rho_cl: float
    Q: float
    rho_mes: float


@dataclass(frozen=True)
class FlowSample:
    """Everything the tracer needs at one point."""

    S: np.ndarray
    rho_cl: float
    Q: float
    rho_mes: float

    @property
    def velocity(self):
        return self.S / self.rho_mes


def _cross(a, b):
    return np.cross(a, b, axis=-1)


def grating_em(scene: GratingScene, x, y) -> EMSample:
    """Fields behind the grating built from psi and its analytic gradient.

    The ``amp_A`` part has H along z, the ``amp_B`` part has E along z; the
    sign of the latter follows ``scene.sign_branch``.
    """
    psi = grating_psi(scene, x, y)
    c = scene.consts
    eps0, omega, k = c.eps0, scene.omega, scene.k
    A, Bamp, sg = scene.amp_A, scene.amp_B, scene.sign
    rot = np.stack([psi.grad[..., 1], -psi.grad[..., 0], np.zeros_like(psi.value)], axis=-1)
    zhat = np.zeros_like(rot)
    zhat[..., 2] = psi.value
    E = (1j * A / (eps0 * omega)) * rot + sg * (k * Bamp / (eps0 * omega)) * zhat
    H = -sg * (1j * Bamp / k) * rot + A * zhat
    return EMSample(E, c.mu0 * H)


def _lg_second_derivatives(scene, x, y, z, h):
    # 4th-order differences of the analytic gradient; returns u_ij in (..., 3, 3)
    st = FDStencil(h, 4)
    out = np.empty(np.shape(x) + (3, 3), dtype=complex)
    for idx in np.ndindex(np.shape(x)):
        pt = np.array([x[idx], y[idx], z[idx]])
        for j in range(3):
            out[idx + (j,)] = fd_gradient(
                lambda p, j=j: lg_u_cartesian(scene, p[:, 0], p[:, 1], p[:, 2]).grad[:, j],
                pt, st)
    return out


def lg_em(scene: LGScene, x, y, z, order="paraxial") -> EMSample:
    """Linearly polarized Laguerre-Gauss fields.

    ``order="paraxial"`` gives the leading-order fields
    ``E = ik (u, 0, (i/k) du/dx) e^{ikz}`` and
    ``B = (ik/c) (0, u, (i/k) du/dy) e^{ikz}``.
    ``order="full"`` derives E and B exactly from the vector potential
    ``x_hat u e^{ikz}`` (Lorenz gauge), which keeps the d/dz and second
    derivative terms the paraxial form drops; it serves as the reference
    for paraxial-error studies.

    The envelope entering the fields is the complex conjugate of
    :func:`~mesoflow.modes.lg_u`: that mode is written for the opposite
    phase convention, and conjugating it gives the same physical beam,
    travelling towards +z, under exp(-i omega t).
    """
    x, y, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                                  np.asarray(z, dtype=float))
    k, cl = scene.k, scene.consts.c
    s = lg_u_cartesian(scene, x, y, z)
    u = np.conj(s.value)
    g = np.conj(s.grad)
    ux, uy, uz = g[..., 0], g[..., 1], g[..., 2]
    carrier = np.exp(1j * k * z)
    zero = np.zeros_like(u)
    if order == "paraxial":
        E = 1j * k * np.stack([u, zero, (1j / k) * ux], axis=-1)
        B = (1j * k / cl) * np.stack([zero, u, (1j / k) * uy], axis=-1)
    elif order == "full":
        d2 = np.conj(_lg_second_derivatives(scene, x, y, z, scene.w0 / 100))
        uxx, uxy, uxz = d2[..., 0, 0], d2[..., 0, 1], d2[..., 0, 2]
        uyy, uzz = d2[..., 1, 1], d2[..., 2, 2]
        # E = (i/k)[grad(d_x psi) - x_hat lap(psi)],  B = curl(x_hat psi)/c
        E = (1j / k) * np.stack([k**2 * u - uyy - uzz - 2j * k * uz,
                                 uxy,
                                 1j * k * ux + uxz], axis=-1)
        B = np.stack([zero, 1j * k * u + uz, -uy], axis=-1) / cl
    else:
        raise ValueError(f"order must be 'paraxial' or 'full', got {order!r}")
    return EMSample(E * carrier[..., None], B * carrier[..., None])


def poynting_avg(s: EMSample, consts: PhysicalConstants = SI):
    """Time-averaged Poynting vector Re(E x B*) / (2 mu0) in W/m^2."""
    return np.real(_cross(s.E, np.conj(s.B))) / (2 * consts.mu0)


def grating_poynting_closed(scene: GratingScene, x, y):
    """Closed-form average Poynting vector behind the grating.

    ``S_xy = (A^2 + B^2) / (2 eps0 omega) * Im(psi* grad psi)`` and S_z is
    identically zero.
    """
    psi = grating_psi(scene, x, y)
    pref = (scene.amp_A**2 + scene.amp_B**2) / (2 * scene.consts.eps0 * scene.omega)
    S = pref * np.imag(np.conj(psi.value)[..., None] * psi.grad)
    S[..., 2] = 0.0
    return S


def lg_poynting_closed(scene: LGScene, r, phi, z):
    """Cylindrical components (S_r, S_phi, S_z) of the paraxial LG Poynting vector.

    ``|u|^2 [r z / (z^2 + z_R^2), l / (k r), 1]`` times ``eps0 c k^2 / 2``,
    the normalization that matches the amplitude convention of
    :func:`lg_em`. S_phi is set to its limit 0 on the axis.
    """
    r, phi, z = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(phi, dtype=float),
                                    np.asarray(z, dtype=float))
    k, zr = scene.k, scene.z_R
    u = lg_u_cartesian(scene, r * np.cos(phi), r * np.sin(phi), z).value
    intensity = np.abs(u) ** 2 * scene.consts.eps0 * scene.consts.c * k**2 / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        s_phi = np.where(r > 0, scene.l / (k * r), 0.0) * intensity
    return np.stack([r * z / (z**2 + zr**2) * intensity, s_phi, intensity], axis=-1)


def cylindrical_to_cartesian(v, phi):
    """Rotate (v_r, v_phi, v_z) at azimuth ``phi`` into (v_x, v_y, v_z)."""
    v = np.asarray(v)
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1], v[..., 2]], axis=-1)


def classical_density(s: EMSample, consts: PhysicalConstants = SI):
    """Cycle-averaged energy density (eps0 |E|^2 + |B|^2 / mu0) / 4 in J/m^3."""
    e2 = np.sum(np.abs(s.E) ** 2, axis=-1)
    b2 = np.sum(np.abs(s.B) ** 2, axis=-1)
    return 0.25 * (consts.eps0 * e2 + b2 / consts.mu0)


def quantum_potential(amp, x, meso: MesoParams, k, *, h, amp_floor=0.0, order=4):
    """Quantum-potential density ``-q_scale rho_ref lap(|u|) / (k^2 |u|)``.

    ``amp`` samples the mode modulus at an ``(m, 3)`` array of points. The
    Laplacian runs over the axes chosen by ``meso.reduction`` with a central
    stencil of spacing ``h``.

    Raises
    ------
    NodeError
        If the modulus at ``x`` does not exceed ``amp_floor``.
    """
    if meso.rho_ref is None:
        raise ValueError("quantum_potential needs meso.rho_ref; resolve it from the scene first")
    x = np.asarray(x, dtype=float)
    centre = float(np.asarray(amp(x[None, :])).reshape(-1)[0])
    if not centre > amp_floor:
        raise NodeError(f"mode amplitude {centre:.3e} at {x.tolist()} is below the node floor {amp_floor:.3e}")
    lap = fd_laplacian(amp, x, FDStencil(h, order), dims=meso.reduction)
    return -meso.q_scale * meso.rho_ref * lap / (k**2 * centre)


def meso_density(rho_cl, Q, coupling) -> DensityBreakdown:
    """``rho_mes = rho_cl + (1 - coupling) Q``."""
    if not 0 <= coupling <= 1:
        raise ValueError(f"coupling must lie in [0, 1], got {coupling}")
    return DensityBreakdown(rho_cl, Q, rho_cl + (1 - coupling) * Q)


class _SceneField:
    """Common machinery for scene-backed flow fields.

    Subclasses provide ``_em(points)``, ``_amp(points)``, ``length_scale``,
    ``fd_step`` and ``_survey()`` (peak rho_cl, |S| and amplitude).
    """

    planar = False

    def __init__(self, scene, meso: MesoParams | None = None):
        self.scene = scene
        self.consts = scene.consts
        meso = meso or MesoParams()
        rho_peak, s_peak, amp_peak = self._survey()
        self.peak_rho_cl = rho_peak
        self.peak_S = s_peak
        self.peak_amp = amp_peak
        if meso.rho_ref is None:
            meso = replace(meso, rho_ref=rho_peak)
        self.meso = meso
        self.stagnation_floor = 1e-9 * s_peak
        self.amp_floor = meso.amp_floor * amp_peak

    def with_coupling(self, coupling):
        twin = object.__new__(type(self))
        twin.__dict__.update(self.__dict__)
        twin.meso = replace(self.meso, coupling=coupling)
        return twin

    @property
    def k(self):
        return self.scene.k

    def em(self, r) -> EMSample:
        r = np.asarray(r, dtype=float)
        return self._em(r.reshape(-1, 3))

    def poynting(self, r):
        S = poynting_avg(self.em(r), self.consts).reshape(np.shape(r))
        if self.planar:
            S[..., 2] = 0.0
        return S

    def classical_density(self, r):
        return classical_density(self.em(r), self.consts).reshape(np.shape(r)[:-1])

    def Q(self, r):
        return quantum_potential(self._amp, r, self.meso, self.k, h=self.fd_step,
                                 amp_floor=self.amp_floor)

    def densities(self, r) -> DensityBreakdown:
        rho = float(self.classical_density(np.asarray(r, dtype=float)))
        return meso_density(rho, self.Q(r), self.meso.coupling)

    def sample(self, r) -> FlowSample:
        r = np.asarray(r, dtype=float)
        em = self._em(r[None, :])
        S = poynting_avg(em, self.consts)[0]
        if self.planar:
            S[2] = 0.0
        rho = float(classical_density(em, self.consts)[0])
        d = meso_density(rho, self.Q(r), self.meso.coupling)
        return FlowSample(S, d.rho_cl, d.Q, d.rho_mes)

    def describe(self):
        return {"rho_ref": self.meso.rho_ref, "peak_rho_cl": self.peak_rho_cl,
                "peak_S": self.peak_S, "peak_amplitude": self.peak_amp,
                "stagnation_floor": self.stagnation_floor, "amp_floor": self.amp_floor,
                "fd_step": self.fd_step}


class GratingField(_SceneField):
    """Grating scene traced in the xy-plane (z frozen, S_z dropped)."""

    planar = True

    @property
    def length_scale(self):
        return self.scene.wavelength

    @property
    def fd_step(self):
        return self.scene.wavelength / 100

    def _em(self, pts):
        return grating_em(self.scene, pts[:, 0], pts[:, 1])

    def _amp(self, pts):
        return np.abs(grating_psi(self.scene, pts[:, 0], pts[:, 1]).value)

    def _survey(self):
        sc = self.scene
        x = np.linspace(-sc.period / 2, sc.period / 2, 64, endpoint=False)
        y = np.linspace(0.0, 2 * sc.period**2 / sc.wavelength, 256)
        X, Y = np.meshgrid(x, y, indexing="ij")
        em = grating_em(sc, X, Y)
        S = poynting_avg(em, sc.consts)
        return (float(classical_density(em, sc.consts).max()),
                float(np.linalg.norm(S, axis=-1).max()),
                float(np.abs(grating_psi(sc, X, Y).value).max()))


class LGField(_SceneField):
    """Laguerre-Gauss scene traced in full 3-space with the paraxial fields."""

    @property
    def length_scale(self):
        return self.scene.w0

    @property
    def fd_step(self):
        return self.scene.w0 / 100

    def _em(self, pts):
        return lg_em(self.scene, pts[:, 0], pts[:, 1], pts[:, 2])

    def _amp(self, pts):
        return np.abs(lg_u_cartesian(self.scene, pts[:, 0], pts[:, 1], pts[:, 2]).value)

    def _survey(self):
        sc = self.scene
        r = np.linspace(0.0, 4 * sc.w0 * np.sqrt(sc.p + abs(sc.l) + 1), 2048)
        zero = np.zeros_like(r)
        em = lg_em(sc, r, zero, zero)
        S = poynting_avg(em, sc.consts)
        return (float(classical_density(em, sc.consts).max()),
                float(np.linalg.norm(S, axis=-1).max()),
                float(np.abs(lg_u_cartesian(sc, r, zero, zero).value).max()))
