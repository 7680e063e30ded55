"""Tests for von Mises(-normal) mixtures: densities, derivative terms, curvature and sampling."""
import math

import numpy as np
import pytest
from scipy.special import iv

from errors import DomainError
from kde import DirLinSample, DirSample
from models import (
    DirLinMixture,
    DirMixture,
    NormalComponent,
    VmfComponent,
    curvature_functionals,
    directional_reference,
    dirlin_reference,
    empirical_mixture,
    hz_dirlin,
    linear_density,
    linear_reference,
    mixture_density,
    normal_pdf,
    psi_term_dir,
    psi_x_dirlin,
    rotate,
    sample,
    uniform_gap,
    vmf_density,
)
from special import log_cq
from sphere import build_line_grid, build_sphere_grid, integrate_line, integrate_sphere, rotation_to, surface_area


def _fd_psi(density, x, eps=3e-5):
    """-x^T grad f + (lap f - x^T H x)/q by central differences of f(y/|y|)."""
    F = lambda y: density(y / np.linalg.norm(y))
    f0 = F(x)
    grad_x = (F(x + eps * x) - F(x - eps * x)) / (2 * eps)
    xhx = (F(x + eps * x) - 2 * f0 + F(x - eps * x)) / eps**2
    lap = 0.0
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = eps
        lap += (F(x + e) - 2 * f0 + F(x - e)) / eps**2
    return -grad_x + (lap - xhx) / (x.size - 1)


def _single_dirlin(mu, kappa, m=0.0, sigma=1.0):
    return DirLinMixture(np.array([1.0]), (VmfComponent(np.asarray(mu, float), kappa),), (NormalComponent(m, sigma),))


class TestDensities:
    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_uniform_component(self, q, rng):
        c = VmfComponent(np.eye(q + 1)[0], 0.0)
        pts = rng.normal(size=(5, q + 1))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        np.testing.assert_allclose(vmf_density(c, pts), 1 / surface_area(q), rtol=1e-14)

    def test_mode_on_sphere(self):
        c = VmfComponent(np.array([0.0, 0.0, 1.0]), 1.0)
        assert vmf_density(c, [0.0, 0.0, 1.0]) == pytest.approx(math.e / (4 * math.pi * math.sinh(1.0)), rel=1e-13)

    def test_single_component_reduces(self):
        m = _single_dirlin([0.6, 0.8], 3.0, m=1.0, sigma=0.5)
        x = np.array([0.0, 1.0])
        assert mixture_density(m, x, 0.2) == pytest.approx(
            vmf_density(m.dir[0], x) * normal_pdf(0.2, 1.0, 0.5), rel=1e-14
        )

    def test_sphere_mixture_normalized(self, sphere_mixture, sphere_grid):
        assert integrate_sphere(lambda x: mixture_density(sphere_mixture, x), sphere_grid) == pytest.approx(1.0, abs=1e-6)

    def test_nonnegative(self, cylinder_mixture, rng):
        x = rng.normal(size=(10_000, 2))
        x /= np.linalg.norm(x, axis=1)[:, None]
        z = rng.normal(1.0, 3.0, size=10_000)
        assert np.all(mixture_density(cylinder_mixture, x, z) >= 0)

    def test_linear_reference_normalized(self, normal_mixture):
        grid = build_line_grid(12.0, 256, center=1.0)
        assert integrate_line(lambda z: linear_density(normal_mixture, z), grid) == pytest.approx(1.0, abs=1e-10)

    def test_dirlin_needs_z(self, cylinder_mixture):
        with pytest.raises(DomainError):
            mixture_density(cylinder_mixture, [1.0, 0.0])

    def test_dimension_mismatch(self, circle_mixture):
        with pytest.raises(DomainError):
            mixture_density(circle_mixture, [1.0, 0.0, 0.0])


class TestMixtureValidation:
    def test_weights_must_sum_to_one(self):
        c = VmfComponent(np.array([1.0, 0.0]), 1.0)
        with pytest.raises(DomainError):
            DirMixture(np.array([0.5, 0.4]), (c, c))

    def test_components_share_sphere(self):
        with pytest.raises(DomainError):
            DirMixture(
                np.array([0.5, 0.5]),
                (VmfComponent(np.array([1.0, 0.0]), 1.0), VmfComponent(np.array([1.0, 0.0, 0.0]), 1.0)),
            )

    def test_negative_kappa(self):
        with pytest.raises(DomainError):
            VmfComponent(np.array([1.0, 0.0]), -1.0)

    def test_reference_weights(self):
        np.testing.assert_allclose(directional_reference(2).weights, [0.4, 0.4, 0.2])
        np.testing.assert_allclose(linear_reference().means, [0.0, 1.0, 2.0])
        np.testing.assert_allclose(dirlin_reference(1).sigmas, [0.5, 1.0, 1.0])


class TestDerivativeTerms:
    def test_psi_at_mode(self):
        kappa = 4.0
        m = DirMixture(np.array([1.0]), (VmfComponent(np.array([0.0, 1.0, 0.0]), kappa),))
        expected = -kappa * math.exp(log_cq(2, kappa) + kappa)
        assert psi_term_dir(m, [0.0, 1.0, 0.0]) == pytest.approx(expected, rel=1e-13)

    def test_psi_uniform(self, rng):
        m = DirMixture(np.array([1.0]), (VmfComponent(np.array([1.0, 0.0]), 0.0),))
        x = rng.normal(size=(20, 2))
        np.testing.assert_array_equal(psi_term_dir(m, x / np.linalg.norm(x, axis=1)[:, None]), 0.0)

    @pytest.mark.parametrize("q", [1, 2])
    def test_psi_finite_difference(self, q, rng):
        m = directional_reference(q)
        for _ in range(5):
            x = rng.normal(size=q + 1)
            x /= np.linalg.norm(x)
            exact = psi_term_dir(m, x)
            assert abs(_fd_psi(lambda y: mixture_density(m, y), x) - exact) < 2e-5 * max(1.0, abs(exact))

    def test_psi_dirlin_separable(self):
        m = _single_dirlin([1.0, 0.0], 2.0, m=0.5, sigma=0.7)
        x, z = np.array([0.6, -0.8]), 1.1
        expected = psi_term_dir(m.directional, x) * normal_pdf(z, 0.5, 0.7)
        assert psi_x_dirlin(m, x, z) == pytest.approx(expected, rel=1e-12)

    def test_psi_dirlin_uniform(self):
        m = _single_dirlin([1.0, 0.0], 0.0)
        assert psi_x_dirlin(m, [0.0, 1.0], 0.3) == 0.0

    def test_psi_dirlin_finite_difference(self, cylinder_mixture):
        z = 0.7
        x = np.array([0.8, 0.6])
        fd = _fd_psi(lambda y: mixture_density(cylinder_mixture, y, z), x)
        exact = psi_x_dirlin(cylinder_mixture, x, z)
        assert abs(fd - exact) < 2e-5 * max(1.0, abs(exact))

    def test_hz_at_mean(self):
        sigma = 0.8
        m = _single_dirlin([1.0, 0.0], 2.0, m=0.3, sigma=sigma)
        x = np.array([0.0, 1.0])
        expected = -vmf_density(m.dir[0], x) * normal_pdf(0.0, 0.0, sigma) / sigma**2
        assert hz_dirlin(m, x, 0.3) == pytest.approx(expected, rel=1e-13)

    def test_hz_integrates_to_zero(self, cylinder_mixture):
        grid = build_line_grid(12.0, 256, center=1.0)
        x = np.array([0.6, 0.8])
        assert abs(integrate_line(lambda z: hz_dirlin(cylinder_mixture, np.tile(x, (z.size, 1)), z), grid)) < 1e-8

    def test_hz_finite_difference(self, cylinder_mixture):
        x, z, eps = np.array([0.0, 1.0]), 0.4, 1e-4
        f = lambda zz: mixture_density(cylinder_mixture, x, zz)
        fd = (f(z + eps) - 2 * f(z) + f(z - eps)) / eps**2
        assert fd == pytest.approx(hz_dirlin(cylinder_mixture, x, z), abs=1e-6)



class TestCurvature:
    def test_uniform_target(self, circle_grid):
        m = DirMixture(np.array([1.0]), (VmfComponent(np.array([1.0, 0.0]), 0.0),))
        assert curvature_functionals(m, circle_grid).R_psi == 0.0
        assert uniform_gap(m, circle_grid) == pytest.approx(0.0, abs=1e-20)

    def test_cauchy_schwarz(self, cylinder_mixture, circle_grid):
        cv = curvature_functionals(cylinder_mixture, circle_grid)
        assert cv.I_cross**2 <= cv.I_psi2 * cv.I_hz2

    def test_grid_refinement_stable(self, circle_mixture):
        coarse = curvature_functionals(circle_mixture, build_sphere_grid(1, 128)).R_psi
        fine = curvature_functionals(circle_mixture, build_sphere_grid(1, 256)).R_psi
        assert coarse == pytest.approx(fine, rel=5e-5)

    def test_r_psi_is_integral_of_square(self, sphere_mixture, sphere_grid):
        direct = integrate_sphere(lambda x: psi_term_dir(sphere_mixture, x) ** 2, sphere_grid)
        assert curvature_functionals(sphere_mixture, sphere_grid).R_psi == pytest.approx(direct, rel=1e-12)

    def test_grid_dimension_checked(self, sphere_mixture, circle_grid):
        with pytest.raises(DomainError):
            curvature_functionals(sphere_mixture, circle_grid)


class TestTransforms:
    def test_rotation_moves_density(self, sphere_mixture, rng):
        Q = rotation_to(rng.normal(size=3))
        rotated = rotate(sphere_mixture, Q)
        x = rng.normal(size=(10, 3))
        x /= np.linalg.norm(x, axis=1)[:, None]
        np.testing.assert_allclose(mixture_density(rotated, x @ Q.T), mixture_density(sphere_mixture, x), rtol=1e-12)

    def test_empirical_mixture(self):
        s = DirLinSample(points=np.array([[1.0, 0.0], [0.0, 1.0]]), z=np.array([0.0, 2.0]))
        m = empirical_mixture(s, 0.5, 0.3)
        np.testing.assert_allclose(m.weights, [0.5, 0.5])
        np.testing.assert_allclose(m.directional.kappas, 4.0)
        np.testing.assert_allclose(m.sigmas, 0.3)

    def test_empirical_needs_pilot_g(self):
        s = DirLinSample(points=np.array([[1.0, 0.0]]), z=np.array([0.0]))
        with pytest.raises(DomainError):
            empirical_mixture(s, 0.5)


class TestSampling:
    def test_uniform_sphere_mean(self):
        m = DirMixture(np.array([1.0]), (VmfComponent(np.array([0.0, 0.0, 1.0]), 0.0),))
        s = sample(m, 10_000, 7)
        assert np.linalg.norm(s.points.mean(axis=0)) < 0.05

    def test_sphere_mean_resultant(self):
        mu = np.array([0.0, 0.6, 0.8])
        m = DirMixture(np.array([1.0]), (VmfComponent(mu, 2.0),))
        t = sample(m, 100_000, 3).points @ mu
        assert t.mean() == pytest.approx(1 / math.tanh(2.0) - 0.5, abs=0.01)

    def test_three_sphere_mean_resultant(self):
        mu = np.array([0.0, 0.0, 0.0, 1.0])
        m = DirMixture(np.array([1.0]), (VmfComponent(mu, 5.0),))
        t = sample(m, 100_000, 11).points @ mu
        assert t.mean() == pytest.approx(iv(2, 5.0) / iv(1, 5.0), abs=0.01)

    def test_circle_mean_resultant(self):
        mu = np.array([0.6, -0.8])
        m = DirMixture(np.array([1.0]), (VmfComponent(mu, 3.0),))
        t = sample(m, 100_000, 5).points @ mu
        assert t.mean() == pytest.approx(iv(1, 3.0) / iv(0, 3.0), abs=0.01)

    def test_deterministic(self, cylinder_mixture):
        a, b = sample(cylinder_mixture, 50, 42), sample(cylinder_mixture, 50, 42)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.z, b.z)

    def test_points_are_unit(self, sphere_mixture):
        s = sample(sphere_mixture, 500, 1)
        assert isinstance(s, DirSample)
        np.testing.assert_allclose(np.linalg.norm(s.points, axis=1), 1.0, atol=1e-12)

    def test_component_frequencies(self, cylinder_mixture):
        n = 10_000
        labels = sample(cylinder_mixture, n, 1).labels
        freq = np.bincount(labels, minlength=3) / n
        p = np.array([0.4, 0.4, 0.2])
        assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n))

    def test_linear_sample(self, normal_mixture):
        z = sample(normal_mixture, 20_000, 2)
        assert z.mean() == pytest.approx(0.4 * 0 + 0.4 * 1 + 0.2 * 2, abs=0.05)

    def test_rejects_empty(self, circle_mixture):
        with pytest.raises(DomainError):
            sample(circle_mixture, 0, 1)
