# ~/dirkde/verify.py
# Self-verification suite: closed forms against independent quadrature.
import logging
import math
from typing import Callable, List

import numpy as np
from pydantic import BaseModel

from errors import VerificationError
from kernels import (
    GAUSSIAN_KERNEL,
    VON_MISES_KERNEL,
    c_hq,
    kernel_constants,
    lambda_hq,
    numeric_constants,
    text_dq,
)
from special import log_bessel_i, log_cq, log_surface_area
from sphere import build_cap_grid, build_sphere_grid, integrate_sphere, surface_area

logger = logging.getLogger("dirkde.verify")


class CheckResult(BaseModel):
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool


class VerifyReport(BaseModel):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _rel(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)


def _check(name: str, value: float, reference: float, tolerance: float, relative: bool = True) -> CheckResult:
    err = _rel(value, reference) if relative else abs(value - reference)
    return CheckResult(
        name=name,
        value=float(value),
        reference=float(reference),
        tolerance=tolerance,
        passed=bool(err < tolerance),
    )


# --- special functions ---
def _bessel_checks() -> List[CheckResult]:
    out = []
    for z in (0.1, 1.0, 10.0, 100.0):
        pre = 0.5 * math.log(2.0 / (math.pi * z))
        half = pre + math.log(math.sinh(z))
        three_half = pre + math.log(math.cosh(z) - math.sinh(z) / z)
        # compare I_nu, not its log
        out.append(_check(f"I_1/2({z:g}) closed form", math.exp(log_bessel_i(0.5, z) - half), 1.0, 1e-10))
        out.append(_check(f"I_3/2({z:g}) closed form", math.exp(log_bessel_i(1.5, z) - three_half), 1.0, 1e-10))
    return out


def _cq_continuity() -> List[CheckResult]:
    return [
        _check(f"log C_{q}(1e-8) -> -log omega_{q}", log_cq(q, 1e-8), -log_surface_area(q), 1e-6, relative=False)
        for q in (1, 2, 3)
    ]


# --- sphere quadrature ---
_MOMENT_RES = {1: 64, 2: 32, 3: 16}


def _moment_checks() -> List[CheckResult]:
    out = []
    for q in (1, 2, 3):
        grid = build_sphere_grid(q, _MOMENT_RES[q])
        omega = surface_area(q)
        out.append(_check(f"sum of weights q={q}", float(grid.weights.sum()), omega, 1e-8))
        first = max(abs(integrate_sphere(lambda x, i=i: x[:, i], grid)) for i in range(q + 1))
        out.append(_check(f"first moments q={q}", first, 0.0, 1e-10, relative=False))
        second = [integrate_sphere(lambda x, i=i: x[:, i] ** 2, grid) for i in range(q + 1)]
        worst = max(second, key=lambda v: _rel(v, omega / (q + 1)))
        out.append(_check(f"second moments q={q}", worst, omega / (q + 1), 1e-7))
        cross = max(
            abs(integrate_sphere(lambda x, i=i, j=j: x[:, i] * x[:, j], grid))
            for i in range(q + 1)
            for j in range(i + 1, q + 1)
        )
        out.append(_check(f"mixed moments q={q}", cross, 0.0, 1e-10, relative=False))
    return out


# --- kernel constants ---
def _constant_checks(inject_text_dq: bool) -> List[CheckResult]:
    out = []
    for q in (1, 2, 3):
        closed = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, q)
        quad = numeric_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, q)
        d_q = text_dq(q) if inject_text_dq else closed.d_q
        out.append(_check(f"lambda_{q} = (2 pi)^(q/2)", closed.lambda_q, quad.lambda_q, 1e-7))
        out.append(_check(f"b_{q} = q/2", closed.b_q, quad.b_q, 1e-7))
        out.append(_check(f"d_{q} = 2^(-q/2)", d_q, quad.d_q, 1e-7))
        out.append(_check(f"e_{q}", closed.e_q, quad.e_q, 1e-7))
    lin = numeric_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 1)
    closed = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, 1)
    out.append(_check("R(K) = 1/(2 sqrt(pi))", closed.R_K, lin.R_K, 1e-7))
    out.append(_check("mu_2(K^2) = 1/(4 sqrt(pi))", closed.mu2_K2, lin.mu2_K2, 1e-7))
    return out


def _normalizer_checks() -> List[CheckResult]:
    out = []
    for q in (1, 2):
        for h in (0.2, 0.5, 1.0):
            pole = np.zeros(q + 1)
            pole[0] = 1.0
            cap = build_cap_grid(pole, h)
            direct = integrate_sphere(lambda y: VON_MISES_KERNEL((1.0 - y @ pole) / (h * h)), cap)
            out.append(_check(f"c_h,q closed form vs quadrature q={q} h={h:g}", 1.0 / c_hq(VON_MISES_KERNEL, q, h), direct, 1e-8))
            ident = c_hq(VON_MISES_KERNEL, q, h) * h**q * lambda_hq(VON_MISES_KERNEL, q, h)
            out.append(_check(f"c_h,q h^q lambda_h,q = 1 q={q} h={h:g}", ident, 1.0, 1e-10))
    return out


LAMBDA_FLOOR = 1e-14


def _lambda_convergence() -> List[CheckResult]:
    out = []
    for q in (1, 2, 3):
        lam = kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, q).lambda_q
        errs = [_rel(lambda_hq(VON_MISES_KERNEL, q, h), lam) for h in (0.5, 0.2, 0.05)]
        out.append(_check(f"lambda_h,{q} -> lambda_{q} at h=0.05", errs[-1], 0.0, 0.01, relative=False))
        # errors already at rounding level count as converged
        monotone = float(all(b <= max(a, LAMBDA_FLOOR) for a, b in zip(errs, errs[1:])))
        out.append(_check(f"lambda_h,{q} error non-increasing as h shrinks", monotone, 1.0, 0.5, relative=False))
    return out


SUITE: List[Callable[[], List[CheckResult]]] = [
    _bessel_checks,
    _cq_continuity,
    _moment_checks,
    _normalizer_checks,
    _lambda_convergence,
]


def run_checks(inject_text_dq: bool = False) -> VerifyReport:
    checks: List[CheckResult] = []
    for fn in SUITE:
        checks.extend(fn())
    checks.extend(_constant_checks(inject_text_dq))
    report = VerifyReport(checks=checks)
    failed = [c.name for c in report.checks if not c.passed]
    logger.info(f"{len(report.checks)} checks, {len(failed)} failed")
    return report


def verify(inject_text_dq: bool = False) -> VerifyReport:
    """Run the suite and raise VerificationError if any check fails."""
    report = run_checks(inject_text_dq)
    if not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        raise VerificationError(f"verification failed: {failed}")
    return report
