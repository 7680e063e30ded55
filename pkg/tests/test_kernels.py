"""Tests for kernel constants and the directional normalizing constant."""
import math

import numpy as np
import pytest
from scipy.special import i0

from errors import DomainError, KernelConditionError
from kernels import (
    GAUSSIAN_KERNEL,
    VON_MISES_KERNEL,
    DirectionalKernel,
    LinearKernel,
    c_hq,
    check_profile,
    kernel_constants,
    lambda_hq,
    numeric_constants,
    text_dq,
)
from sphere import build_cap_grid, integrate_sphere

EXP_PROFILE = DirectionalKernel.custom(lambda r: np.exp(-r), name="exp")


class TestKernelConstants:
    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_von_mises_closed_forms(self, q):
        k = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, q)
        assert k.lambda_q == pytest.approx((2 * math.pi) ** (q / 2), rel=1e-10)
        assert k.b_q == pytest.approx(q / 2, rel=1e-10)
        assert k.d_q == pytest.approx(2 ** (-q / 2), rel=1e-10)
        assert min(k.lambda_q, k.b_q, k.d_q, k.e_q, k.mu2_K, k.R_K, k.mu2_K2) > 0

    def test_sphere_values(self):
        k = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 2)
        assert (k.b_q, k.d_q) == pytest.approx((1.0, 0.5))
        assert k.lambda_q == pytest.approx(2 * math.pi)

    def test_circle_values(self):
        k = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 1)
        assert k.b_q == pytest.approx(0.5)
        assert k.lambda_q == pytest.approx(math.sqrt(2 * math.pi))

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_quadrature_reproduces_closed_forms(self, q):
        quad = numeric_constants(EXP_PROFILE, GAUSSIAN_KERNEL, q)
        closed = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, q)
        assert quad.d_q == pytest.approx(2 ** (-q / 2), rel=1e-7)
        assert quad.lambda_q == pytest.approx(closed.lambda_q, rel=1e-7)
        assert quad.b_q == pytest.approx(closed.b_q, rel=1e-7)
        assert quad.e_q == pytest.approx(closed.e_q, rel=1e-7)

    def test_gaussian_linear_constants(self):
        quad = numeric_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 1)
        assert quad.mu2_K == pytest.approx(1.0, rel=1e-8)
        assert quad.R_K == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-8)
        assert quad.mu2_K2 == pytest.approx(1 / (4 * math.sqrt(math.pi)), rel=1e-8)

    def test_text_value_differs(self):
        assert text_dq(2) == pytest.approx(2 * kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 2).d_q)

    def test_rejects_unsupported_q(self):
        with pytest.raises(DomainError):
            kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 5)


class TestCustomKernels:
    def test_heavy_tail_profile_rejected(self):
        heavy = DirectionalKernel.custom(lambda r: 1.0 / (1.0 + r) ** 1.2, name="heavy")
        with pytest.raises(KernelConditionError):
            check_profile(heavy, 2)

    def test_exponential_profile_accepted(self):
        check_profile(EXP_PROFILE, 3)

    def test_custom_needs_profile(self):
        with pytest.raises(DomainError):
            DirectionalKernel(kind="custom")

    def test_asymmetric_linear_kernel_rejected(self):
        with pytest.raises(DomainError):
            LinearKernel.custom(lambda v: np.where(np.asarray(v) > 0, np.exp(-np.asarray(v)), 0.0))

    def test_logistic_accepted(self):
        logistic = LinearKernel.custom(lambda v: 0.25 / np.cosh(0.5 * np.asarray(v)) ** 2, name="logistic")
        assert logistic(0.0) == pytest.approx(0.25)
        assert numeric_constants(VON_MISES_KERNEL, logistic, 1).mu2_K == pytest.approx(math.pi**2 / 3, rel=1e-8)


class TestNormalizingConstant:
    def test_circle_closed_form(self):
        """c^{-1} = 2 pi I_0(1) e^{-1} at q = 1, h = 1."""
        assert 1 / c_hq(VON_MISES_KERNEL, 1, 1.0) == pytest.approx(2 * math.pi * i0(1.0) / math.e, rel=1e-12)

    @pytest.mark.parametrize("q, h", [(1, 1.0), (2, 0.3), (3, 0.5)])
    def test_matches_direct_integral(self, q, h):
        pole = np.zeros(q + 1)
        pole[0] = 1.0
        cap = build_cap_grid(pole, h)
        direct = integrate_sphere(lambda y: np.exp(-(1 - y @ pole) / h**2), cap)
        assert 1 / c_hq(VON_MISES_KERNEL, q, h) == pytest.approx(direct, rel=1e-8)

    @pytest.mark.parametrize("L", [VON_MISES_KERNEL, EXP_PROFILE])
    @pytest.mark.parametrize("q, h", [(1, 0.5), (2, 0.1), (3, 1.5)])
    def test_identity_with_lambda(self, L, q, h):
        assert c_hq(L, q, h) * h**q * lambda_hq(L, q, h) == pytest.approx(1.0, abs=1e-10)

    def test_small_h_expansion(self):
        h = 0.1
        ratio = (1 / c_hq(VON_MISES_KERNEL, 2, h)) / ((2 * math.pi) * h**2)
        assert ratio == pytest.approx(1.0, abs=0.02)

    def test_lambda_converges(self):
        lam = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 2).lambda_q
        err = lambda h: abs(lambda_hq(VON_MISES_KERNEL, 2, h) / lam - 1)
        assert err(0.05) < 0.01
        assert err(0.05) < err(0.5)

    def test_lambda_endpoint_singularity(self):
        assert np.isfinite(lambda_hq(VON_MISES_KERNEL, 1, 0.5))

    def test_tiny_h_does_not_overflow(self):
        assert np.isfinite(math.log(c_hq(VON_MISES_KERNEL, 2, 0.01)))
