"""Analytic scalar modes: the grating-diffracted Helmholtz field psi(x, y) and
the Laguerre-Gauss envelope u_pl(r, phi, z), each with analytic first partials.

Time dependence is exp(-i omega t) throughout, so exp(+i k y) travels towards
+y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as _sc

from .errors import DomainError, UnsupportedDegreeError
from .numerics import fourier_coefficient

__all__ = [
    "PhysicalConstants",
    "SI",
    "GratingScene",
    "LGScene",
    "ComplexSample",
    "laguerre_poly",
    "grating_psi",
    "lg_u",
    "lg_u_cartesian",
]

MAX_LAGUERRE_DEGREE = 64


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants. ``eps0`` defaults to ``1/(mu0 c^2)`` so the identity is exact."""

    mu0: float = _sc.mu_0
    c: float = _sc.c
    hbar: float = _sc.hbar
    eps0: float = None

    def __post_init__(self):
        if self.eps0 is None:
            object.__setattr__(self, "eps0", 1.0 / (self.mu0 * self.c**2))
        if abs(self.eps0 * self.mu0 * self.c**2 - 1.0) > 1e-12:
            raise ValueError("eps0 * mu0 must equal 1/c^2 to 1e-12")


SI = PhysicalConstants()


@dataclass(frozen=True)
class ComplexSample:
    """A complex scalar and its gradient (d/dx, d/dy, d/dz) in the last axis."""

    value: np.ndarray
    grad: np.ndarray


@dataclass(frozen=True)
class GratingScene:
    """Plane wave along +y through a binary amplitude grating in the plane y = 0.

    The open fraction ``duty`` of each period is centred on x = 0 (mod d), so
    the transmittance is even and every Fourier coefficient is real.
    ``amp_A`` multiplies the H_z-polarized part and ``amp_B`` the E_z part.
    """

    wavelength: float
    period: float
    duty: float = 0.5
    orders: int = 10
    amp_A: float = 1.0
    amp_B: float = 0.0
    sign_branch: str = "upper"
    consts: PhysicalConstants = field(default=SI, repr=False)

    def __post_init__(self):
        problems = []
        if not self.wavelength > 0:
            problems.append(f"wavelength must be > 0, got {self.wavelength}")
        if not self.period > 0:
            problems.append(f"period must be > 0, got {self.period}")
        if not 0 < self.duty <= 1:
            problems.append(f"duty must lie in (0, 1], got {self.duty}")
        if int(self.orders) != self.orders or self.orders < 1:
            problems.append(f"orders must be an integer >= 1, got {self.orders}")
        if self.amp_A == 0 and self.amp_B == 0:
            problems.append("at least one of amp_A, amp_B must be nonzero")
        if self.sign_branch not in ("upper", "lower"):
            problems.append(f"sign_branch must be 'upper' or 'lower', got {self.sign_branch!r}")
        if problems:
            raise ValueError("; ".join(problems))

        n = np.arange(-self.orders, self.orders + 1)
        ratio = n * self.wavelength / self.period     # q_n / k
        s2 = ratio**2
        s2 = np.where(np.abs(1 - s2) < 1e-12, 1.0, s2)   # grazing orders: beta = 0
        beta = self.k * np.where(s2 <= 1, np.sqrt(np.abs(1 - s2)) + 0j,
                                 1j * np.sqrt(np.abs(s2 - 1)))
        half = self.duty / 2
        coeffs = np.array([
            fourier_coefficient(lambda xi: (np.abs(xi) < half).astype(float), int(j),
                                breakpoints=(-half, half))
            for j in n])
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_q", 2 * np.pi * n / self.period)
        object.__setattr__(self, "_beta", beta)
        object.__setattr__(self, "_coeffs", coeffs)

    @property
    def k(self):
        return 2 * np.pi / self.wavelength

    @property
    def omega(self):
        return self.consts.c * self.k

    @property
    def sign(self):
        return 1.0 if self.sign_branch == "upper" else -1.0

    def diffraction_orders(self):
        """Return ``(n, q_n, beta_n, c_n)`` arrays for the retained orders."""
        return self._n.copy(), self._q.copy(), self._beta.copy(), self._coeffs.copy()


@dataclass(frozen=True)
class LGScene:
    """Laguerre-Gauss beam with waist ``w0`` at z = 0, propagating along +z."""

    p: int
    l: int
    w0: float
    wavelength: float
    amplitude: complex = 1.0
    consts: PhysicalConstants = field(default=SI, repr=False)

    def __post_init__(self):
        problems = []
        if int(self.p) != self.p or self.p < 0:
            problems.append(f"p must be a non-negative integer, got {self.p}")
        elif self.p > MAX_LAGUERRE_DEGREE:
            problems.append(f"p must be <= {MAX_LAGUERRE_DEGREE}, got {self.p}")
        if int(self.l) != self.l:
            problems.append(f"l must be an integer, got {self.l}")
        if not self.w0 > 0:
            problems.append(f"w0 must be > 0, got {self.w0}")
        if not self.wavelength > 0:
            problems.append(f"wavelength must be > 0, got {self.wavelength}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def k(self):
        return 2 * np.pi / self.wavelength

    @property
    def omega(self):
        return self.consts.c * self.k

    @property
    def z_R(self):
        return np.pi * self.w0**2 / self.wavelength

    def beam_radius(self, z):
        return self.w0 * np.sqrt(1 + (np.asarray(z) / self.z_R) ** 2)


def laguerre_poly(p, l, x):
    """Associated Laguerre polynomial L_p^l(x).

    Uses the three-term recurrence in the degree,
    (k+1) L_{k+1} = (2k + 1 + l - x) L_k - (k + l) L_{k-1}.
    """
    if int(p) != p or p < 0:
        raise ValueError(f"degree p must be a non-negative integer, got {p}")
    if p > MAX_LAGUERRE_DEGREE:
        raise UnsupportedDegreeError(f"degree {p} exceeds the supported maximum {MAX_LAGUERRE_DEGREE}")
    if l < 0:
        raise ValueError(f"order l must be non-negative, got {l}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev
    cur = 1.0 + l - x
    for j in range(1, int(p)):
        prev, cur = cur, ((2 * j + 1 + l - x) * cur - (j + l) * prev) / (j + 1)
    return cur


def _laguerre_deriv(p, l, x):
    # d/dx L_p^l = -L_{p-1}^{l+1}
    if p == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return -laguerre_poly(p - 1, l + 1, x)


def grating_psi(scene: GratingScene, x, y) -> ComplexSample:
    """Diffracted scalar field ``sum_n c_n exp(i(q_n x + beta_n y))`` for y >= 0.

    ``x`` and ``y`` broadcast against each other; ``grad`` gains a trailing
    axis of length 3 whose z entry is zero.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(y < 0):
        raise DomainError("grating field is defined only for y >= 0")
    q, beta, c = scene._q, scene._beta, scene._coeffs
    shape = (-1,) + (1,) * x.ndim
    terms = c.reshape(shape) * np.exp(1j * (q.reshape(shape) * x + beta.reshape(shape) * y))
    value = terms.sum(axis=0)
    grad = np.stack([(1j * q.reshape(shape) * terms).sum(axis=0),
                     (1j * beta.reshape(shape) * terms).sum(axis=0),
                     np.zeros_like(value)], axis=-1)
    return ComplexSample(value, grad)


def lg_u(scene: LGScene, r, phi, z) -> ComplexSample:
    """Laguerre-Gauss envelope in cylindrical coordinates.

    The value is the product of amplitude, r^|l| envelope, Laguerre
    polynomial, Gaussian, wavefront curvature, azimuthal phase exp(-i l phi)
    and Gouy phase exp(i(2p + |l| + 1) atan(z/z_R)). The gradient is returned
    in Cartesian components and stays finite on the axis.
    """
    r, phi, z = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(phi, dtype=float),
                                    np.asarray(z, dtype=float))
    if np.any(r < 0):
        raise DomainError("radial coordinate must be non-negative")
    p, l, m = scene.p, scene.l, abs(scene.l)
    k, zr = scene.k, scene.z_R
    w = scene.beam_radius(z)
    value = (scene.amplitude / np.sqrt(1 + z**2 / zr**2)
             * (r * math.sqrt(2) / w) ** m
             * laguerre_poly(p, m, 2 * r**2 / w**2)
             * np.exp(-r**2 / w**2)
             * np.exp(-1j * k * r**2 * z / (2 * (z**2 + zr**2)))
             * np.exp(-1j * l * phi)
             * np.exp(1j * (2 * p + m + 1) * np.arctan(z / zr)))
    grad = lg_u_cartesian(scene, r * np.cos(phi), r * np.sin(phi), z).grad
    return ComplexSample(value, grad)


def lg_u_cartesian(scene: LGScene, x, y, z) -> ComplexSample:
    """Same mode as :func:`lg_u`, written through ``zeta = x - i sgn(l) y``.

    ``r^|l| exp(-i l phi) = zeta^|l|``, which keeps every derivative free of
    1/r factors.
    """
    x, y, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                                  np.asarray(z, dtype=float))
    p, m = scene.p, abs(scene.l)
    sgn = 1.0 if scene.l >= 0 else -1.0
    k, zr = scene.k, scene.z_R
    d2 = z**2 + zr**2
    w2 = scene.w0**2 * (1 + z**2 / zr**2)
    s = x**2 + y**2
    xi = 2 * s / w2
    gamma = 1 / w2 + 1j * k * z / (2 * d2)

    P = (scene.amplitude / np.sqrt(1 + z**2 / zr**2) * (2 / w2) ** (m / 2)
         * np.exp(1j * (2 * p + m + 1) * np.arctan(z / zr)))
    dlnP = (-(m + 1) * z + 1j * (2 * p + m + 1) * zr) / d2

    L = laguerre_poly(p, m, xi)
    dL = _laguerre_deriv(p, m, xi)
    g = np.exp(-s * gamma)
    F = L * g
    F_s = (2 / w2 * dL - gamma * L) * g
    xi_z = -2 * xi * z / d2
    gamma_z = -2 * z / (d2 * w2) + 0.5j * k * (zr**2 - z**2) / d2**2
    F_z = (dL * xi_z - s * gamma_z * L) * g

    zeta = x - 1j * sgn * y
    zm = zeta**m
    zm1 = m * zeta ** (m - 1) if m > 0 else np.zeros_like(zeta)

    value = P * zm * F
    ux = P * (zm1 * F + zm * 2 * x * F_s)
    uy = P * (-1j * sgn * zm1 * F + zm * 2 * y * F_s)
    uz = value * dlnP + P * zm * F_z
    return ComplexSample(value, np.stack([ux, uy, uz], axis=-1))
