import math

import numpy as np
import pytest
import scipy.constants as sc
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre

from mesoflow.errors import DomainError, UnsupportedDegreeError
from mesoflow.modes import (SI, GratingScene, LGScene, PhysicalConstants, grating_psi,
                            laguerre_poly, lg_u, lg_u_cartesian)
from mesoflow.numerics import FDStencil, fd_gradient, fd_laplacian

LAM = 632.8e-9


def _series_laguerre(p, l, x):
    # sum_k (-1)^k C(p+l, p-k) x^k / k!
    return sum((-1) ** k * math.comb(p + l, p - k) * x**k / math.factorial(k) for k in range(p + 1))


class TestConstants:
    def test_identity_holds(self):
        assert abs(SI.eps0 * SI.mu0 * SI.c**2 - 1) < 1e-15

    def test_eps0_close_to_codata(self):
        assert SI.eps0 == pytest.approx(sc.epsilon_0, rel=1e-9)

    def test_inconsistent_eps0_rejected(self):
        with pytest.raises(ValueError):
            PhysicalConstants(eps0=2 * sc.epsilon_0)


class TestLaguerre:
    @pytest.mark.parametrize("l", [0, 1, 5])
    def test_degree_zero(self, l):
        np.testing.assert_array_equal(laguerre_poly(0, l, np.array([0.0, 2.5, 10.0])), 1.0)

    def test_known_values(self):
        assert laguerre_poly(1, 2, 3.0) == pytest.approx(0.0, abs=1e-15)
        assert laguerre_poly(2, 0, 2.0) == pytest.approx(-1.0)

    @settings(max_examples=60, deadline=None)
    @given(p=st.integers(0, 12), l=st.integers(0, 6), x=st.floats(0, 20))
    def test_matches_series(self, p, l, x):
        want = _series_laguerre(p, l, x)
        assert laguerre_poly(p, l, x) == pytest.approx(want, rel=1e-9, abs=1e-9 * (1 + x) ** p)

    @pytest.mark.parametrize("p, l", [(20, 0), (40, 3), (64, 1)])
    def test_high_degree_matches_scipy(self, p, l):
        x = np.linspace(0, 30, 31)
        np.testing.assert_allclose(laguerre_poly(p, l, x), eval_genlaguerre(p, l, x),
                                   rtol=1e-8, atol=1e-8 * np.abs(eval_genlaguerre(p, l, x)).max())

    def test_degree_limit(self):
        with pytest.raises(UnsupportedDegreeError):
            laguerre_poly(65, 0, 1.0)

    @pytest.mark.parametrize("p, l", [(-1, 0), (1.5, 0), (2, -1)])
    def test_bad_arguments(self, p, l):
        with pytest.raises(ValueError):
            laguerre_poly(p, l, 1.0)


class TestGratingScene:
    def test_validation_aggregates(self):
        with pytest.raises(ValueError) as info:
            GratingScene(wavelength=-1, period=0, duty=1.5, orders=0, amp_A=0, amp_B=0,
                         sign_branch="middle")
        msg = str(info.value)
        for key in ("wavelength", "period", "duty", "orders", "amp_A", "sign_branch"):
            assert key in msg

    def test_order_classification(self):
        sc_ = GratingScene(LAM, 5 * LAM, duty=0.5, orders=8)
        n, q, beta, c = sc_.diffraction_orders()
        prop = np.abs(n) <= 4
        assert np.all(np.isreal(beta[prop])) and np.all(beta[prop].real > 0)
        np.testing.assert_array_equal(beta[np.abs(n) == 5], 0)
        ev = np.abs(n) > 5
        assert np.all(beta[ev].real == 0) and np.all(beta[ev].imag > 0)

    def test_coefficients_real_for_centred_opening(self):
        _, _, _, c = GratingScene(LAM, 5 * LAM, duty=0.3).diffraction_orders()
        assert np.all(np.abs(c.imag) < 1e-15)

    def test_no_grating_is_plane_wave(self):
        sc_ = GratingScene(LAM, 5 * LAM, duty=1.0, orders=6)
        x = np.linspace(-3, 3, 7) * LAM
        y = np.linspace(0, 4, 7) * LAM
        psi = grating_psi(sc_, x, y)
        np.testing.assert_allclose(psi.value, np.exp(1j * sc_.k * y), atol=1e-13)
        np.testing.assert_allclose(np.abs(psi.value), 1, atol=1e-13)

    def test_negative_y_rejected(self):
        with pytest.raises(DomainError):
            grating_psi(GratingScene(LAM, 5 * LAM), 0.0, -1e-9)

    def test_periodic_in_x(self):
        sc_ = GratingScene(LAM, 5 * LAM)
        a = grating_psi(sc_, 0.3 * LAM, 2 * LAM).value
        b = grating_psi(sc_, 0.3 * LAM + sc_.period, 2 * LAM).value
        assert abs(a - b) < 1e-12

    def test_analytic_gradient_matches_fd(self):
        sc_ = GratingScene(LAM, 5 * LAM, orders=10)
        x0 = np.array([0.7 * LAM, 1.3 * LAM, 0.0])
        g = lambda p: grating_psi(sc_, p[:, 0], p[:, 1]).value
        fd = fd_gradient(g, x0, FDStencil(LAM / 200, 4))
        an = grating_psi(sc_, x0[0], x0[1]).grad
        np.testing.assert_allclose(fd, an, atol=1e-8 * sc_.k)

    def test_helmholtz_residual(self):
        rng = np.random.default_rng(3)
        sc_ = GratingScene(LAM, 5 * LAM, duty=0.5, orders=10)
        g = lambda p: grating_psi(sc_, p[:, 0], p[:, 1]).value
        worst = 0.0
        for _ in range(20):
            x0 = np.array([rng.uniform(-5, 5) * LAM, rng.uniform(0.5, 10) * LAM, 0.0])
            psi = grating_psi(sc_, x0[0], x0[1]).value
            if abs(psi) < 1e-3:
                continue
            # the 2nd-order stencil alone leaves (kh)^2/12 ~ 8e-5 at this spacing
            lap = fd_laplacian(g, x0, FDStencil(LAM / 200, 4), dims="transverse")
            worst = max(worst, abs(lap + sc_.k**2 * psi) / (sc_.k**2 * abs(psi)))
        assert worst < 1e-6


class TestLG:
    def scene(self, p=0, l=2, kw0=100.0, amp=1.0):
        k = 2 * np.pi / LAM
        return LGScene(p, l, kw0 / k, LAM, amplitude=amp)

    def test_validation(self):
        with pytest.raises(ValueError) as info:
            LGScene(-1, 0.5, 0.0, -1.0)
        for key in ("p", "l", "w0", "wavelength"):
            assert f"{key} must" in str(info.value)

    @pytest.mark.parametrize("p", [0, 1, 3])
    def test_vanishes_on_axis(self, p):
        sc_ = self.scene(p=p, l=1)
        assert abs(lg_u(sc_, 0.0, 0.3, 0.1 * sc_.z_R).value) == 0

    def test_fundamental_at_waist(self):
        sc_ = self.scene(p=0, l=0, amp=2.5)
        r = np.linspace(0, 3, 13) * sc_.w0
        np.testing.assert_allclose(lg_u(sc_, r, 0.0, 0.0).value, 2.5 * np.exp(-r**2 / sc_.w0**2),
                                   rtol=1e-14)

    @pytest.mark.parametrize("p, l", [(0, 0), (1, 2), (2, -3)])
    def test_gouy_phase_at_rayleigh_range(self, p, l):
        sc_ = self.scene(p=p, l=l)
        # on axis (or at small r for l != 0) with curvature removed
        r = 1e-3 * sc_.w0 if l else 0.0
        u = lg_u(sc_, r, 0.0, sc_.z_R).value
        curv = np.exp(-1j * sc_.k * r**2 * sc_.z_R / (4 * sc_.z_R**2))
        L = laguerre_poly(p, abs(l), r**2 / sc_.w0**2)
        phase = np.angle(u / curv / np.sign(L))
        want = np.angle(np.exp(1j * (2 * p + abs(l) + 1) * np.pi / 4))
        assert abs(np.angle(np.exp(1j * (phase - want)))) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(p=st.integers(0, 3), l=st.integers(-3, 3),
           r=st.floats(0.05, 2.5), phi=st.floats(-np.pi, np.pi), z=st.floats(-0.5, 0.5))
    def test_cartesian_matches_polar(self, p, l, r, phi, z):
        sc_ = self.scene(p=p, l=l)
        a = lg_u(sc_, r * sc_.w0, phi, z * sc_.z_R).value
        b = lg_u_cartesian(sc_, r * sc_.w0 * np.cos(phi), r * sc_.w0 * np.sin(phi), z * sc_.z_R).value
        assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300) + 1e-15

    @pytest.mark.parametrize("p, l", [(0, 1), (1, 2), (2, -1), (0, 0)])
    def test_gradient_matches_fd(self, p, l):
        sc_ = self.scene(p=p, l=l)
        x0 = np.array([0.4, -0.7, 0.3]) * np.array([sc_.w0, sc_.w0, sc_.z_R])
        g = lambda pts: lg_u_cartesian(sc_, pts[:, 0], pts[:, 1], pts[:, 2]).value
        an = lg_u_cartesian(sc_, *x0).grad
        # transverse and axial scales differ; difference each axis at its own scale
        for ax, h in ((0, sc_.w0 / 200), (1, sc_.w0 / 200), (2, sc_.z_R / 200)):
            e = np.zeros(3)
            e[ax] = h
            fd = (-g((x0 + 2 * e)[None]) + 8 * g((x0 + e)[None]) - 8 * g((x0 - e)[None])
                  + g((x0 - 2 * e)[None]))[0] / (12 * h)
            assert abs(fd - an[ax]) < 1e-8 * np.abs(an).max() * sc_.w0 / h

    def test_gradient_finite_on_axis(self):
        sc_ = self.scene(p=0, l=1)
        g = lg_u(sc_, 0.0, 0.0, 0.0).grad
        assert np.all(np.isfinite(g)) and np.abs(g[:2]).max() > 0

    def test_negative_radius_rejected(self):
        with pytest.raises(DomainError):
            lg_u(self.scene(), -1e-6, 0.0, 0.0)

    def test_azimuthal_phase_winding(self):
        sc_ = self.scene(p=0, l=3)
        phi = np.linspace(0, 2 * np.pi, 400)
        u = lg_u(sc_, sc_.w0, phi, 0.0).value
        winding = np.sum(np.angle(u[1:] / u[:-1])) / (2 * np.pi)
        assert round(winding) == -3
