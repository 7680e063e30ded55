# ~/dirkde/risk.py
# Error functionals of the estimators: exact, asymptotic and bootstrap MISE, pointwise
# bias/variance, the Monte Carlo ISE oracle, the normality check and the bandwidth
# minimizers.
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

import config
from errors import ConvergenceError, DegenerateTargetError, DomainError
from kde import Bandwidths, DirLinSample, DirSample, eval_dir, eval_dirlin, eval_grid, eval_linear
from kernels import (
    GAUSSIAN_KERNEL,
    VON_MISES_KERNEL,
    DirectionalKernel,
    KernelConstants,
    LinearKernel,
    c_hq,
    kernel_constants,
)
from models import (
    Curvature,
    DirLinMixture,
    DirMixture,
    LinMixture,
    curvature_functionals,
    hz_dirlin,
    linear_density,
    mixture_density,
    mixture_density_grid,
    normal_convolutions,
    psi_term_dir,
    psi_x_dirlin,
    sample,
)
from special import log_cq, log_dq_factor
from sphere import LineGrid, SphereGrid, build_cap_grid, build_line_grid

logger = logging.getLogger("dirkde.risk")

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_PI = math.sqrt(math.pi)
# entries of Psi matrices that move more than this under grid refinement get a warning
REFINE_TOL = 1e-6
MAXITER_2D = 500


# ---------- types ----------
@dataclass(frozen=True)
class PsiMatrices:
    psi0: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    h: float


@dataclass(frozen=True)
class OmegaMatrices:
    omega0: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    g: float


@dataclass(frozen=True)
class RiskRow:
    method: str
    n: int
    h: Optional[float]
    value: float
    g: Optional[float] = None
    se: Optional[float] = None
    argmin: bool = False


@dataclass
class RiskCurve:
    rows: List[RiskRow] = field(default_factory=list)

    def add(self, row: RiskRow) -> None:
        self.rows.append(row)

    def series(self, method: str, n: int) -> List[RiskRow]:
        return [r for r in self.rows if r.method == method and r.n == n and not r.argmin]

    def argmin(self, method: str, n: int) -> Optional[RiskRow]:
        pts = self.series(method, n)
        return min(pts, key=lambda r: r.value) if pts else None


@dataclass(frozen=True)
class MinimizeResult:
    x: Tuple[float, ...]
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PointwiseRecord:
    density: float
    expectation: float
    exact_bias: float
    abias: float
    second_moment: float  # E[kernel term^2] / n, the part of the variance the expansion targets
    exact_var: float
    avar: float
    avar2: float


@dataclass(frozen=True)
class NormalityResult:
    ks_statistic: float
    p_value: float
    mean: float
    std: float
    replicates: int


# ---------- log-space helpers ----------
def _log_gram(P: np.ndarray, Q: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """log sum_x w_x exp(P[x, i] + Q[x, j]) for every (i, j).

    Columns are shifted by their maxima before the product; pairs whose mass underflows
    come back as -inf.
    """
    mp, mq = P.max(axis=0), Q.max(axis=0)
    G = (np.exp(P - mp) * weights[:, None]).T @ np.exp(Q - mq)
    with np.errstate(divide="ignore"):
        return np.log(G) + mp[:, None] + mq[None, :]


def _log_quadform(log_p: np.ndarray, S: np.ndarray) -> float:
    return float(logsumexp(log_p[:, None] + log_p[None, :] + S))


def _safe_log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _log_normal(d: np.ndarray, s: np.ndarray) -> np.ndarray:
    return -0.5 * (d / s) ** 2 - np.log(s) - LOG_SQRT_2PI


def _check_n(n: int) -> None:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")


def _check_h(h: float, name: str = "h") -> None:
    if not (h > 0 and math.isfinite(h)):
        raise DomainError(f"{name} must be > 0, got {h!r}")


class _StrippedPsi:
    """Psi_a(h) with the C_q(kappa_i) C_q(kappa_j) factors taken out, in log space.

    Folding those factors into the weights as p_i C_q(kappa_i) turns every quadratic form
    into sum_ij exp(log p~_i + log p~_j + S_ij).
    """

    def __init__(self, mus: np.ndarray, kappas: np.ndarray, q: int, h: float, grid: SphereGrid):
        if grid.q != q:
            raise DomainError(f"grid is on the {grid.q}-sphere, model on the {q}-sphere")
        _check_h(h)
        self.q, self.h = q, h
        self.log_c = np.asarray(log_cq(q, kappas), dtype=float).reshape(-1)
        kh = 1.0 / (h * h)
        a = kappas[:, None] * mus  # kappa_i mu_i
        a2 = np.sum(a * a, axis=1)

        pair = a2[:, None] + a2[None, :] + 2.0 * (a @ a.T)
        self.S0 = -np.asarray(log_cq(q, np.sqrt(np.clip(pair, 0.0, None))))

        lin = grid.nodes @ a.T  # (N, r): kappa_j x^T mu_j
        norms = np.sqrt(np.clip(kh * kh + 2.0 * kh * lin + a2[None, :], 0.0, None))
        A = -np.asarray(log_cq(q, norms))
        log_ch = log_cq(q, kh)
        self.S1 = log_ch + _log_gram(A, lin, grid.weights)
        self.S2 = 2.0 * log_ch + _log_gram(A, A, grid.weights)

    def matrices(self) -> PsiMatrices:
        outer = self.log_c[:, None] + self.log_c[None, :]
        return PsiMatrices(
            psi0=np.exp(outer + self.S0),
            psi1=np.exp(outer + self.S1),
            psi2=np.exp(outer + self.S2),
            h=self.h,
        )

    def folded(self, log_p: np.ndarray) -> np.ndarray:
        return log_p + self.log_c


def _stripped(m: DirMixture, h: float, grid: SphereGrid) -> _StrippedPsi:
    return _StrippedPsi(m.mus, m.kappas, m.q, h, grid)


def psi_matrices(m, h: float, grid: SphereGrid, refined: Optional[SphereGrid] = None) -> PsiMatrices:
    """Psi_0 (closed form), Psi_1 and Psi_2 (sphere quadrature) for the von Mises kernel.

    With `refined`, the matrices are recomputed on that grid and a warning is logged if
    any entry moves by more than REFINE_TOL relative.
    """
    d = m.directional if isinstance(m, DirLinMixture) else m
    mats = _stripped(d, h, grid).matrices()
    if refined is not None:
        fine = _stripped(d, h, refined).matrices()
        for name in ("psi1", "psi2"):
            a, b = getattr(mats, name), getattr(fine, name)
            change = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
            if change > REFINE_TOL:
                logger.warning(f"{name} moved {change:.2e} under grid refinement (h={h:g}); raise --grid-res")
    return mats


def _log_omegas(means: np.ndarray, sigmas: np.ndarray, g: float) -> List[np.ndarray]:
    # entry ij of Omega_a is phi_s(m_i - m_j) with s^2 = a g^2 + sigma_i^2 + sigma_j^2
    d = means[:, None] - means[None, :]
    s2 = sigmas[:, None] ** 2 + sigmas[None, :] ** 2
    return [_log_normal(d, np.sqrt(a * g * g + s2)) for a in (0, 1, 2)]


def omega_matrices(means: np.ndarray, sigmas: np.ndarray, g: float) -> OmegaMatrices:
    _check_h(g, "g")
    om = [np.exp(lo) for lo in _log_omegas(np.asarray(means, float), np.asarray(sigmas, float), g)]
    return OmegaMatrices(omega0=om[0], omega1=om[1], omega2=om[2], g=g)


# ---------- exact MISE ----------
def _combine(n: int, lq0: float, lq1: float, lq2: float) -> float:
    return (1.0 - 1.0 / n) * math.exp(lq2) - 2.0 * math.exp(lq1) + math.exp(lq0)


def exact_mise_linear(m: LinMixture, g: float, n: int) -> float:
    """Exact MISE of the Gaussian-kernel linear estimator for a normal mixture."""
    _check_n(n)
    om = omega_matrices(m.means, m.sigmas, g)
    p = m.weights
    bias = p @ ((1.0 - 1.0 / n) * om.omega2 - 2.0 * om.omega1 + om.omega0) @ p
    return 1.0 / (2.0 * SQRT_PI * g * n) + float(bias)


def _exact_dir(log_p, mus, kappas, q, h, n, grid) -> float:
    _check_n(n)
    sp = _StrippedPsi(mus, kappas, q, h, grid)
    lp = sp.folded(log_p)
    form = _combine(n, _log_quadform(lp, sp.S0), _log_quadform(lp, sp.S1), _log_quadform(lp, sp.S2))
    return math.exp(log_dq_factor(q, h)) / n + form


def _exact_dirlin(log_p, mus, kappas, means, sigmas, q, h, g, n, grid) -> float:
    _check_n(n)
    _check_h(g, "g")
    sp = _StrippedPsi(mus, kappas, q, h, grid)
    lo0, lo1, lo2 = _log_omegas(means, sigmas, g)
    lp = sp.folded(log_p)
    form = _combine(
        n,
        _log_quadform(lp, sp.S0 + lo0),
        _log_quadform(lp, sp.S1 + lo1),
        _log_quadform(lp, sp.S2 + lo2),
    )
    return math.exp(log_dq_factor(q, h)) / (2.0 * SQRT_PI * g * n) + form


def exact_mise_dir(m: DirMixture, h: float, n: int, grid: SphereGrid) -> float:
    """Exact MISE of the von Mises-kernel directional estimator for a von Mises mixture.

    D_q(h)/n + p^T[(1 - 1/n) Psi_2 - 2 Psi_1 + Psi_0] p.
    """
    return _exact_dir(_safe_log(m.weights), m.mus, m.kappas, m.q, h, n, grid)


def exact_mise_dirlin(m: DirLinMixture, h: float, g: float, n: int, grid: SphereGrid) -> float:
    """D_q(h)/(2 sqrt(pi) g n) + p^T[(1 - 1/n) Psi_2*Omega_2 - 2 Psi_1*Omega_1 + Psi_0*Omega_0] p."""
    d = m.directional
    return _exact_dirlin(_safe_log(m.weights), d.mus, d.kappas, m.means, m.sigmas, m.q, h, g, n, grid)


def bootstrap_mise_dir(sample_: DirSample, h: float, h_p: float, grid: SphereGrid) -> float:
    """Exact MISE under smooth-bootstrap resampling from the pilot estimate with bandwidth h_p."""
    _check_h(h_p, "h_p")
    n = sample_.n
    log_p = np.full(n, -math.log(n))
    kappas = np.full(n, 1.0 / (h_p * h_p))
    return _exact_dir(log_p, sample_.points, kappas, sample_.q, h, n, grid)


def bootstrap_mise_dirlin(
    sample_: DirLinSample, h: float, g: float, h_p: float, g_p: float, grid: SphereGrid
) -> float:
    _check_h(h_p, "h_p")
    _check_h(g_p, "g_p")
    n = sample_.n
    log_p = np.full(n, -math.log(n))
    kappas = np.full(n, 1.0 / (h_p * h_p))
    sigmas = np.full(n, float(g_p))
    return _exact_dirlin(log_p, sample_.points, kappas, sample_.z, sigmas, sample_.q, h, g, n, grid)


# ---------- AMISE ----------
def _curvature(m, grid: Optional[SphereGrid], curvature: Optional[Curvature]) -> Curvature:
    if curvature is not None:
        return curvature
    if grid is None:
        raise DomainError("AMISE needs either a sphere grid or precomputed curvature functionals")
    return curvature_functionals(m, grid)


def _consts(m, constants: Optional[KernelConstants]) -> KernelConstants:
    return constants if constants is not None else kernel_constants(VON_MISES_KERNEL, GAUSSIAN_KERNEL, m.q)


def amise_dir(
    m: DirMixture,
    h: float,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
) -> float:
    """b_q^2 R(Psi) h^4 + d_q / (lambda_q h^q n)."""
    _check_h(h)
    _check_n(n)
    k = _consts(m, constants)
    cv = _curvature(m, grid, curvature)
    return k.b_q**2 * cv.R_psi * h**4 + k.d_q / (k.lambda_q * h**m.q * n)


def amise_dir_slope(
    m: DirMixture,
    h: float,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
) -> float:
    """d/dh of amise_dir: 4 b_q^2 R(Psi) h^3 - q d_q / (lambda_q n h^{q+1})."""
    k = _consts(m, constants)
    cv = _curvature(m, grid, curvature)
    return 4.0 * k.b_q**2 * cv.R_psi * h**3 - m.q * k.d_q / (k.lambda_q * n * h ** (m.q + 1))


def amise_dirlin(
    m: DirLinMixture,
    h: float,
    g: float,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
) -> float:
    _check_h(h)
    _check_h(g, "g")
    _check_n(n)
    k = _consts(m, constants)
    cv = _curvature(m, grid, curvature)
    bias = (
        k.b_q**2 * cv.I_psi2 * h**4
        + 0.25 * k.mu2_K**2 * cv.I_hz2 * g**4
        + k.b_q * k.mu2_K * cv.I_cross * h * h * g * g
    )
    return bias + k.d_q * k.R_K / (k.lambda_q * h**m.q * n * g)


def _r_second_derivative(m: LinMixture) -> float:
    _, _, fourth = normal_convolutions(m.means, m.sigmas)
    return float(m.weights @ fourth @ m.weights)


def amise_linear(m: LinMixture, g: float, n: int) -> float:
    """1/4 mu_2(K)^2 R(f'') g^4 + R(K)/(n g) for the Gaussian kernel."""
    _check_h(g, "g")
    _check_n(n)
    return 0.25 * _r_second_derivative(m) * g**4 + 1.0 / (2.0 * SQRT_PI * n * g)


def g_amise_linear(m: LinMixture, n: int) -> float:
    """[R(K) / (mu_2(K)^2 R(f'') n)]^{1/5} with R(f'') exact for the normal mixture."""
    _check_n(n)
    return (1.0 / (2.0 * SQRT_PI * _r_second_derivative(m) * n)) ** 0.2


def h_amise_dir(
    m: DirMixture,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
) -> float:
    """[q d_q / (4 b_q^2 lambda_q R(Psi) n)]^{1/(4+q)}."""
    _check_n(n)
    k = _consts(m, constants)
    cv = _curvature(m, grid, curvature)
    if not cv.R_psi > 0:
        raise DegenerateTargetError("R(Psi) = 0 (uniform target): the AMISE has no finite minimizer")
    q = m.q
    return (q * k.d_q / (4.0 * k.b_q**2 * k.lambda_q * cv.R_psi * n)) ** (1.0 / (4 + q))


def _beta_start(k: KernelConstants, cv: Curvature, q: int, n: int) -> Tuple[float, float]:
    A = k.b_q**2 * cv.I_psi2
    B = 0.25 * k.mu2_K**2 * cv.I_hz2
    beta = (A / B) ** 0.25
    c1, c2, c3 = A, B * beta**4, k.b_q * k.mu2_K * cv.I_cross * beta**2
    c4 = k.d_q * k.R_K / (k.lambda_q * n * beta)
    h = ((q + 1) * c4 / (4.0 * (c1 + c2 + c3))) ** (1.0 / (5 + q))
    return h, beta * h


def hg_amise_search(
    m: DirLinMixture,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
    tol: float = 1e-8,
    strict: bool = True,
) -> MinimizeResult:
    """AMISE-optimal (h, g) with search diagnostics.

    With g = beta h, q = 1 has a closed form; for q > 1 that closed form only seeds a
    Nelder-Mead search on (log h, log g).
    """
    _check_n(n)
    k = _consts(m, constants)
    cv = _curvature(m, grid, curvature)
    if not (cv.I_psi2 > 0 and cv.I_hz2 > 0):
        raise DegenerateTargetError("curvature functionals vanish: the AMISE has no finite minimizer")
    start = _beta_start(k, cv, m.q, n)
    amise = lambda hh, gg: amise_dirlin(m, hh, gg, n, k, curvature=cv)
    if m.q == 1:
        return MinimizeResult(x=start, value=amise(*start), iterations=0, converged=True)
    return minimize_2d(amise, start, tol=tol, strict=strict)


def hg_amise_dirlin(
    m: DirLinMixture,
    n: int,
    constants: Optional[KernelConstants] = None,
    grid: Optional[SphereGrid] = None,
    curvature: Optional[Curvature] = None,
    tol: float = 1e-8,
) -> Tuple[float, float]:
    return hg_amise_search(m, n, constants, grid, curvature, tol).x


# ---------- minimizers ----------
def minimize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-8,
    log_scale: bool = False,
    strict: bool = True,
) -> MinimizeResult:
    """Bounded scalar minimization of a unimodal f on [lo, hi].

    With log_scale the search runs on log x and `tol` is relative.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo!r}, {hi!r}]")
    if log_scale:
        if not lo > 0:
            raise DomainError(f"log-scale search needs lo > 0, got {lo!r}")
        fn, bounds = (lambda u: f(math.exp(u))), (math.log(lo), math.log(hi))
    else:
        fn, bounds = f, (lo, hi)
    res = optimize.minimize_scalar(fn, bounds=bounds, method="bounded", options={"xatol": tol, "maxiter": 500})
    x = math.exp(res.x) if log_scale else float(res.x)
    out = MinimizeResult(x=(x,), value=float(res.fun), iterations=int(res.nfev), converged=bool(res.success))
    if not out.converged:
        logger.warning(f"scalar minimizer stopped after {out.iterations} evaluations at x={x:.6g}")
        if strict:
            raise ConvergenceError("scalar minimization did not converge", best=out.x, iterations=out.iterations)
    return out


def minimize_2d(
    f: Callable[[float, float], float],
    start: Sequence[float],
    tol: float = 1e-8,
    log_scale: bool = True,
    strict: bool = True,
) -> MinimizeResult:
    """Nelder-Mead over two positive parameters, capped at MAXITER_2D iterations."""
    x0 = np.asarray(start, dtype=float)
    if log_scale:
        if np.any(x0 <= 0):
            raise DomainError(f"log-scale search needs a positive start, got {tuple(x0)}")
        fn = lambda u: f(math.exp(u[0]), math.exp(u[1]))
        x0 = np.log(x0)
    else:
        fn = lambda u: f(u[0], u[1])
    f0 = abs(fn(x0))
    res = optimize.minimize(
        fn,
        x0,
        method="Nelder-Mead",
        options={"maxiter": MAXITER_2D, "xatol": tol, "fatol": tol * max(f0, 1e-300)},
    )
    x = tuple(float(v) for v in (np.exp(res.x) if log_scale else res.x))
    out = MinimizeResult(x=x, value=float(res.fun), iterations=int(res.nit), converged=bool(res.success))
    if not out.converged:
        logger.warning(f"Nelder-Mead stopped after {out.iterations} iterations at {x}")
        if strict:
            raise ConvergenceError("2-D minimization did not converge", best=x, iterations=out.iterations)
    return out


# ---------- pointwise bias and variance ----------
def _dir_moments(d: DirMixture, x: np.ndarray, h: float, L: DirectionalKernel) -> Tuple[np.ndarray, np.ndarray]:
    # per component j: E[c L((1 - x^T X)/h^2)] and E[(c L(...))^2] under vM(mu_j, kappa_j)
    q, kh = d.q, 1.0 / (h * h)
    a = d.kappas[:, None] * d.mus
    if L.is_von_mises:
        log_ch = log_cq(q, kh)
        first = log_ch + d.log_cs - np.asarray(log_cq(q, np.linalg.norm(kh * x[None, :] + a, axis=1)))
        second = 2.0 * log_ch + d.log_cs - np.asarray(log_cq(q, np.linalg.norm(2.0 * kh * x[None, :] + a, axis=1)))
        return np.exp(first), np.exp(second)
    cap = build_cap_grid(x, h)
    c = c_hq(L, q, h)
    ker = c * L((1.0 - cap.nodes @ x) * kh)
    dens = np.exp(d.log_cs[None, :] + cap.nodes @ a.T)
    return (ker * cap.weights) @ dens, (ker * ker * cap.weights) @ dens


def _lin_moments(means: np.ndarray, sigmas: np.ndarray, z: float, g: float, K: LinearKernel):
    # per component: E[K((z - Z)/g)/g] and E[(K((z - Z)/g)/g)^2] under N(m_j, sigma_j^2)
    if K.is_gaussian:
        first = np.exp(_log_normal(z - means, np.sqrt(g * g + sigmas**2)))
        second = np.exp(_log_normal(z - means, np.sqrt(0.5 * g * g + sigmas**2))) / (2.0 * SQRT_PI * g)
        return first, second
    vg = build_line_grid(40.0, 2048)
    kv = K(vg.nodes)
    phi = np.exp(_log_normal(z - g * vg.nodes[:, None] - means[None, :], sigmas[None, :]))
    return (kv * vg.weights) @ phi, (kv * kv * vg.weights) @ phi / g


def pointwise_bias_var(
    m,
    x,
    z: Optional[float] = None,
    *,
    bw: Bandwidths,
    n: int,
    L: DirectionalKernel = VON_MISES_KERNEL,
    K: LinearKernel = GAUSSIAN_KERNEL,
) -> PointwiseRecord:
    """Exact bias and variance of the estimator at one point against their expansions."""
    _check_n(n)
    d = m.directional if isinstance(m, DirLinMixture) else m
    xv = np.asarray(x, dtype=float).ravel()
    xv = xv / np.linalg.norm(xv)
    q, h = d.q, bw.h
    k = kernel_constants(L, K, q)
    c = c_hq(L, q, h)
    dir1, dir2 = _dir_moments(d, xv, h, L)
    p = d.weights

    if isinstance(m, DirLinMixture):
        if z is None or bw.g is None:
            raise DomainError("a directional-linear point needs z and a bandwidth g")
        g = bw.g
        lin1, lin2 = _lin_moments(m.means, m.sigmas, float(z), g, K)
        mean, second = float(p @ (dir1 * lin1)), float(p @ (dir2 * lin2))
        f = mixture_density(m, xv, z)
        psi = psi_x_dirlin(m, xv, z)
        hz = hz_dirlin(m, xv, z)
        abias = k.b_q * psi * h * h + 0.5 * k.mu2_K * hz * g * g
        avar = c * k.d_q * k.R_K * f / (n * g)
        avar2 = c / (n * g) * (k.R_K * (k.d_q * f + k.e_q * h * h * psi) + 0.5 * k.d_q * k.mu2_K2 * hz * g * g)
    else:
        mean, second = float(p @ dir1), float(p @ dir2)
        f = mixture_density(m, xv)
        psi = psi_term_dir(m, xv)
        abias = k.b_q * psi * h * h
        avar = c * k.d_q * f / n
        avar2 = c / n * (k.d_q * f + k.e_q * h * h * psi)

    return PointwiseRecord(
        density=f,
        expectation=mean,
        exact_bias=mean - f,
        abias=abias,
        second_moment=second / n,
        exact_var=(second - mean * mean) / n,
        avar=avar,
        avar2=avar2,
    )


# ---------- Monte Carlo ----------
def _replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng([seed, r])


def _run_replicates(fn: Callable[[int], float], replicates: int, workers: Optional[int]) -> np.ndarray:
    # results come back in replicate-index order whatever the scheduling
    workers = workers or config.WORKERS
    if workers <= 1:
        return np.array([fn(r) for r in range(replicates)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(fn, range(replicates))))


def mc_ise(
    m: Union[DirMixture, DirLinMixture, LinMixture],
    bw: Bandwidths,
    n: int,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    grid: Optional[SphereGrid] = None,
    lgrid: Optional[LineGrid] = None,
    workers: Optional[int] = None,
) -> Tuple[float, float]:
    """Mean and standard error of the ISE over seeded replicates.

    Replicate r draws its sample from a generator seeded with (seed, r).
    """
    replicates = config.REPLICATES if replicates is None else replicates
    seed = config.SEED if seed is None else seed
    if replicates < 2:
        raise DomainError(f"replicates must be >= 2, got {replicates}")
    _check_n(n)

    if isinstance(m, LinMixture):
        if lgrid is None or bw.g is None:
            raise DomainError("linear MC ISE needs a line grid and g")
        truth = linear_density(m, lgrid.nodes)

        def one(r: int) -> float:
            data = sample(m, n, _replicate_rng(seed, r))
            err = eval_linear(data, bw.g, lgrid.nodes) - truth
            return float(lgrid.weights @ (err * err))

    elif isinstance(m, DirLinMixture):
        if grid is None or lgrid is None:
            raise DomainError("directional-linear MC ISE needs sphere and line grids")
        truth = mixture_density_grid(m, grid.nodes, lgrid.nodes)

        def one(r: int) -> float:
            err = eval_grid(sample(m, n, _replicate_rng(seed, r)), bw, grid, lgrid) - truth
            return float(grid.weights @ (err * err) @ lgrid.weights)

    else:
        if grid is None:
            raise DomainError("directional MC ISE needs a sphere grid")
        truth = mixture_density(m, grid.nodes)

        def one(r: int) -> float:
            err = eval_grid(sample(m, n, _replicate_rng(seed, r)), bw, grid) - truth
            return float(grid.weights @ (err * err))

    ises = _run_replicates(one, replicates, workers)
    mean = float(np.mean(ises))
    se = float(np.std(ises, ddof=1) / math.sqrt(replicates))
    logger.debug(f"mc_ise n={n} bw={bw} replicates={replicates}: {mean:.6g} +/- {se:.2g}")
    return mean, se


def normality_check(
    m,
    x,
    z: Optional[float] = None,
    *,
    bw: Bandwidths,
    n: int = 2000,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> NormalityResult:
    """Kolmogorov-Smirnov test of the standardized, bias-corrected estimator at one point.

    Each replicate gives (f_hat - f - ABias) / sqrt(avar) with the exact normalizing
    constant in avar.
    """
    replicates = config.REPLICATES if replicates is None else replicates
    seed = config.SEED if seed is None else seed
    d = m.directional if isinstance(m, DirLinMixture) else m
    scale = n * bw.h**d.q * (bw.g if isinstance(m, DirLinMixture) else 1.0)
    if n < 2 or scale < 1.0:
        raise DomainError(f"normality check needs n h^q g >> 1, got n={n} (n h^q g = {scale:.3g})")
    if replicates < 2:
        raise DomainError(f"replicates must be >= 2, got {replicates}")
    rec = pointwise_bias_var(m, x, z, bw=bw, n=n)
    sd = math.sqrt(rec.avar)
    xv = np.asarray(x, dtype=float)

    def one(r: int) -> float:
        draw = sample(m, n, _replicate_rng(seed, r))
        if isinstance(m, DirLinMixture):
            est = eval_dirlin(draw, bw, xv, z)
        else:
            est = eval_dir(draw, bw.h, xv)
        return (est - rec.density - rec.abias) / sd

    vals = _run_replicates(one, replicates, workers)
    ks = stats.kstest(vals, "norm")
    return NormalityResult(
        ks_statistic=float(ks.statistic),
        p_value=float(ks.pvalue),
        mean=float(np.mean(vals)),
        std=float(np.std(vals, ddof=1)),
        replicates=replicates,
    )


# ---------- rates ----------
def bandwidth_rates(m: DirLinMixture, ns: Sequence[int], grid: SphereGrid) -> Tuple[float, float]:
    """Log-log slopes of the AMISE-optimal (h, g) against n; reported only."""
    cv = curvature_functionals(m, grid)
    pts = np.array([hg_amise_dirlin(m, n, curvature=cv) for n in ns])
    logn = np.log(np.asarray(ns, dtype=float))
    slope_h = float(np.polyfit(logn, np.log(pts[:, 0]), 1)[0])
    slope_g = float(np.polyfit(logn, np.log(pts[:, 1]), 1)[0])
    return slope_h, slope_g


# ---------- sweeps ----------
METHODS = ("exact", "amise", "boot", "mc")


def _check_axis(values: Sequence[float], name: str) -> List[float]:
    vals = [float(v) for v in values]
    if not vals or any(v <= 0 for v in vals):
        raise DomainError(f"{name} values must be > 0")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise DomainError(f"{name} values must be strictly increasing")
    return vals


def _mark_argmins(curve: RiskCurve) -> RiskCurve:
    keys = sorted({(r.method, r.n) for r in curve.rows}, key=lambda k: (METHODS.index(k[0]), k[1]))
    for method, n in keys:
        best = curve.argmin(method, n)
        curve.add(RiskRow(method, n, best.h, best.value, g=best.g, se=best.se, argmin=True))
    return curve


def sweep(
    m,
    hs: Sequence[float],
    ns: Sequence[int],
    methods: Sequence[str],
    gs: Optional[Sequence[float]] = None,
    grid: Optional[SphereGrid] = None,
    lgrid: Optional[LineGrid] = None,
    data: Optional[DirSample] = None,
    h_p: Optional[float] = None,
    g_p: Optional[float] = None,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> RiskCurve:
    """Tabulate every requested error curve over the bandwidth axes, plus one argmin row per (method, n).

    Linear models sweep g alone (taken from `gs`, or from `hs` if `gs` is absent);
    directional-linear models sweep the full h x g product.
    """
    unknown = [mt for mt in methods if mt not in METHODS]
    if unknown:
        raise DomainError(f"unknown method(s) {unknown}; choose from {METHODS}")
    curve = RiskCurve()

    if isinstance(m, LinMixture):
        if "boot" in methods:
            raise DomainError("bootstrap MISE is only defined for directional models")
        axis = _check_axis(gs if gs else hs, "g")
        for n in ns:
            for g in axis:
                for method in methods:
                    if method == "exact":
                        curve.add(RiskRow("exact", n, None, exact_mise_linear(m, g, n), g=g))
                    elif method == "amise":
                        curve.add(RiskRow("amise", n, None, amise_linear(m, g, n), g=g))
                    else:
                        mean, se = mc_ise(m, Bandwidths(g, g), n, replicates, seed, lgrid=lgrid, workers=workers)
                        curve.add(RiskRow("mc", n, None, mean, g=g, se=se))
        return _mark_argmins(curve)

    hs = _check_axis(hs, "h")
    dirlin = isinstance(m, DirLinMixture)
    if dirlin:
        if not gs:
            raise DomainError("a directional-linear sweep needs g values")
        gs = _check_axis(gs, "g")
    else:
        gs = [None]
    if "boot" in methods and (data is None or h_p is None or (dirlin and g_p is None)):
        raise DomainError("bootstrap MISE needs a data sample and pilot bandwidths")
    cv = curvature_functionals(m, grid) if "amise" in methods else None

    for n in ns:
        for h in hs:
            for g in gs:
                for method in methods:
                    if method == "boot" and n != ns[0]:
                        continue
                    se = None
                    if method == "exact":
                        value = exact_mise_dirlin(m, h, g, n, grid) if dirlin else exact_mise_dir(m, h, n, grid)
                    elif method == "amise":
                        value = amise_dirlin(m, h, g, n, curvature=cv) if dirlin else amise_dir(m, h, n, curvature=cv)
                    elif method == "boot":
                        if dirlin:
                            value = bootstrap_mise_dirlin(data, h, g, h_p, g_p, grid)
                        else:
                            value = bootstrap_mise_dir(data, h, h_p, grid)
                        curve.add(RiskRow("boot", data.n, h, value, g=g))
                        continue
                    else:
                        value, se = mc_ise(m, Bandwidths(h, g), n, replicates, seed, grid, lgrid, workers)
                    curve.add(RiskRow(method, n, h, value, g=g, se=se))
        logger.info(f"sweep n={n}: {len(hs) * len(gs)} bandwidths x {len(methods)} methods")
    return _mark_argmins(curve)
