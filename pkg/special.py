# ~/dirkde/special.py
# Special functions behind the von Mises normalizing constants, all in log space
# so that kappa = 1/h^2 never overflows.
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln, ive, logsumexp

from errors import DomainError, OverflowNumericError

LOG_2PI = math.log(2.0 * math.pi)
LOG_FLOAT_MAX = math.log(np.finfo(float).max)

# below this kappa C_q uses the series (1/omega_q)(1 - kappa^2/(2(q+1)))
SMALL_KAPPA = 1e-6
# terms kept in the small-z power series of I_nu
_SERIES_TERMS = 12


@dataclass(frozen=True)
class LogValue:
    """Natural log of a positive magnitude that may not fit in linear scale."""

    log_magnitude: float

    @property
    def value(self) -> float:
        if self.log_magnitude > LOG_FLOAT_MAX:
            raise OverflowNumericError(f"exp({self.log_magnitude:.6g}) is not representable")
        return math.exp(self.log_magnitude)


def _scalar_or_array(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def log_gamma(p):
    """ln Gamma(p) for p > 0."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma needs p > 0, got {p!r}")
    return _scalar_or_array(gammaln(arr), arr.ndim == 0)


def _log_bessel_series(nu: float, z: np.ndarray) -> np.ndarray:
    # ln sum_k (z/2)^{2k+nu} / (k! Gamma(k+nu+1)), only used where ive underflows
    k = np.arange(_SERIES_TERMS).reshape(-1, 1)
    logz2 = np.log(z / 2.0).reshape(1, -1)
    terms = (2 * k + nu) * logz2 - gammaln(k + 1) - gammaln(k + nu + 1)
    return logsumexp(terms, axis=0)


def log_bessel_i(nu: float, z):
    """ln I_nu(z) for nu >= 0, z >= 0.

    Exponentially scaled ive carries the bulk of the range; where it underflows to
    zero (tiny z against nu) the short power series takes over. I_0(0) = 1 gives 0,
    I_nu(0) = 0 for nu > 0 gives -inf.
    """
    if nu < 0:
        raise DomainError(f"log_bessel_i needs nu >= 0, got {nu!r}")
    arr = np.asarray(z, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"log_bessel_i needs z >= 0, got {z!r}")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)

    zero = flat == 0.0
    out[zero] = 0.0 if nu == 0 else -np.inf

    pos = ~zero
    if np.any(pos):
        zp = flat[pos]
        scaled = ive(nu, zp)
        with np.errstate(divide="ignore"):
            vals = np.log(scaled) + zp
        under = ~(scaled > 0)
        if np.any(under):
            vals[under] = _log_bessel_series(nu, zp[under])
        out[pos] = vals
    return _scalar_or_array(out.reshape(arr.shape), arr.ndim == 0)


def log_surface_area(q: int) -> float:
    # defined for q >= 0 (omega_0 = 2 counts the two points of the 0-sphere)
    return math.log(2.0) + 0.5 * (q + 1) * math.log(math.pi) - math.lgamma(0.5 * (q + 1))


def log_cq(q: int, kappa):
    """ln C_q(kappa), the von Mises-Fisher normalizing constant on the q-sphere.

    C_q(kappa) = kappa^{(q-1)/2} / ((2 pi)^{(q+1)/2} I_{(q-1)/2}(kappa)); at kappa = 0
    the uniform density 1/omega_q.
    """
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    arr = np.asarray(kappa, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"kappa must be >= 0, got {kappa!r}")
    nu = 0.5 * (q - 1)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)

    small = flat < SMALL_KAPPA
    out[small] = -log_surface_area(q) - flat[small] ** 2 / (2.0 * (q + 1))

    big = ~small
    if np.any(big):
        kb = flat[big]
        out[big] = nu * np.log(kb) - 0.5 * (q + 1) * LOG_2PI - log_bessel_i(nu, kb)
    return _scalar_or_array(out.reshape(arr.shape), arr.ndim == 0)


def log_dq_factor(q: int, h: float) -> float:
    if not h > 0:
        raise DomainError(f"h must be > 0, got {h!r}")
    kappa = 1.0 / (h * h)
    return 2.0 * log_cq(q, kappa) - log_cq(q, 2.0 * kappa)


def dq_factor(q: int, h: float) -> float:
    """D_q(h) = C_q(1/h^2)^2 / C_q(2/h^2), the integral of a squared kernel bump."""
    return LogValue(log_dq_factor(q, h)).value
