# ~/dirkde/models.py
# Target densities: von Mises-Fisher and normal mixtures, the derivative terms the bias
# expansions use, and seeded samplers.
from dataclasses import dataclass
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from errors import DomainError
from kde import DirLinSample, DirSample
from special import log_cq, log_surface_area
from sphere import SphereGrid, UnitVector, complete_basis, integrate_sphere

logger = logging.getLogger("dirkde.models")

# below this concentration a component is drawn as uniform
UNIFORM_KAPPA = 1e-8
_REJECTION_BATCH = 4096


# ---------- components ----------
@dataclass(frozen=True)
class VmfComponent:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", UnitVector(self.mu).coords)
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be >= 0, got {self.kappa!r}")
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def q(self) -> int:
        return self.mu.size - 1

    @property
    def log_c(self) -> float:
        return log_cq(self.q, self.kappa)


@dataclass(frozen=True)
class NormalComponent:
    m: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be > 0, got {self.sigma!r}")
        if not math.isfinite(self.m):
            raise DomainError(f"mean must be finite, got {self.m!r}")
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "sigma", float(self.sigma))


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size < 1:
        raise DomainError("a mixture needs at least one component")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("mixture weights must be finite and >= 0")
    if abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"mixture weights must sum to 1, got {w.sum()!r}")
    w.setflags(write=False)
    return w


# ---------- mixtures ----------
@dataclass(frozen=True)
class DirMixture:
    weights: np.ndarray
    components: Tuple[VmfComponent, ...]

    def __post_init__(self):
        w = _check_weights(self.weights)
        comps = tuple(self.components)
        if len(comps) != w.size:
            raise DomainError(f"{w.size} weights but {len(comps)} components")
        if len({c.q for c in comps}) != 1:
            raise DomainError("all components must live on the same sphere")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def q(self) -> int:
        return self.components[0].q

    @property
    def r(self) -> int:
        return len(self.components)

    @property
    def mus(self) -> np.ndarray:
        return np.array([c.mu for c in self.components])

    @property
    def kappas(self) -> np.ndarray:
        return np.array([c.kappa for c in self.components])

    @property
    def log_cs(self) -> np.ndarray:
        return np.asarray(log_cq(self.q, self.kappas))


@dataclass(frozen=True)
class LinMixture:
    weights: np.ndarray
    components: Tuple[NormalComponent, ...]

    def __post_init__(self):
        w = _check_weights(self.weights)
        comps = tuple(self.components)
        if len(comps) != w.size:
            raise DomainError(f"{w.size} weights but {len(comps)} components")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.m for c in self.components])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.components])


@dataclass(frozen=True)
class DirLinMixture:
    weights: np.ndarray
    dir: Tuple[VmfComponent, ...]
    lin: Tuple[NormalComponent, ...]

    def __post_init__(self):
        if len(tuple(self.dir)) != len(tuple(self.lin)):
            raise DomainError("each von Mises component needs its normal partner")
        d = DirMixture(self.weights, self.dir)
        object.__setattr__(self, "weights", d.weights)
        object.__setattr__(self, "dir", d.components)
        object.__setattr__(self, "lin", tuple(self.lin))

    @property
    def directional(self) -> DirMixture:
        return DirMixture(self.weights, self.dir)

    @property
    def linear(self) -> LinMixture:
        return LinMixture(self.weights, self.lin)

    @property
    def q(self) -> int:
        return self.dir[0].q

    @property
    def r(self) -> int:
        return len(self.dir)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.m for c in self.lin])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.lin])


Mixture = Union[DirMixture, DirLinMixture]


def _dir_part(m: Mixture) -> DirMixture:
    return m.directional if isinstance(m, DirLinMixture) else m


# ---------- densities ----------
def _points(x, q: int) -> Tuple[np.ndarray, bool]:
    if isinstance(x, UnitVector):
        x = x.coords
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != q + 1:
        raise DomainError(f"point has dimension {arr.shape[1]}, model needs {q + 1}")
    return arr, single


def _cos_table(m: DirMixture, pts: np.ndarray) -> np.ndarray:
    # (N, r) table of x^T mu_j
    return pts @ m.mus.T


def _log_vmf_table(m: DirMixture, pts: np.ndarray) -> np.ndarray:
    return m.log_cs[None, :] + m.kappas[None, :] * _cos_table(m, pts)


def normal_pdf(z, m: float = 0.0, sigma: float = 1.0):
    u = (np.asarray(z, dtype=float) - m) / sigma
    return np.exp(-0.5 * u * u) / (sigma * math.sqrt(2.0 * math.pi))


def _normal_table(m: DirLinMixture, z: np.ndarray) -> np.ndarray:
    return normal_pdf(z[:, None], m.means[None, :], m.sigmas[None, :])


def _unwrap(out: np.ndarray, single: bool):
    return float(out[0]) if single else out


def vmf_density(c: VmfComponent, x):
    """C_q(kappa) exp(kappa x^T mu)."""
    pts, single = _points(x, c.q)
    return _unwrap(np.exp(c.log_c + c.kappa * (pts @ c.mu)), single)


def linear_density(m: LinMixture, z):
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    out = normal_pdf(zs[:, None], m.means[None, :], m.sigmas[None, :]) @ m.weights
    return float(out[0]) if np.ndim(z) == 0 else out


def mixture_density(m: Mixture, x, z=None):
    """Mixture density at x (directional) or at paired (x, z) (directional-linear)."""
    d = _dir_part(m)
    pts, single = _points(x, d.q)
    dens = np.exp(_log_vmf_table(d, pts))
    if isinstance(m, DirLinMixture):
        if z is None:
            raise DomainError("a directional-linear density needs z")
        zs = np.broadcast_to(np.asarray(z, dtype=float), (pts.shape[0],))
        dens = dens * _normal_table(m, zs)
    return _unwrap(dens @ d.weights, single)


def mixture_density_grid(m: DirLinMixture, nodes: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """(N, M) table of the directional-linear density over sphere nodes x line nodes."""
    d = m.directional
    dens = np.exp(_log_vmf_table(d, np.asarray(nodes, dtype=float)))
    lin = _normal_table(m, np.asarray(zs, dtype=float))
    return (dens * d.weights[None, :]) @ lin.T


# ---------- derivative terms ----------
def _psi_factor(d: DirMixture, pts: np.ndarray) -> np.ndarray:
    # (N, r): kappa_j f_j(x) (-t_j + kappa_j (1 - t_j^2)/q), the per-component Psi term
    t = _cos_table(d, pts)
    k = d.kappas[None, :]
    return k * np.exp(_log_vmf_table(d, pts)) * (-t + k * (1.0 - t * t) / d.q)


def psi_term_dir(m: DirMixture, x):
    """Psi(f, x) = -x^T grad f + q^{-1}(lap f - x^T H x) for a von Mises mixture."""
    pts, single = _points(x, m.q)
    return _unwrap(_psi_factor(m, pts) @ m.weights, single)


def psi_x_dirlin(m: DirLinMixture, x, z):
    d = m.directional
    pts, single = _points(x, d.q)
    zs = np.broadcast_to(np.asarray(z, dtype=float), (pts.shape[0],))
    return _unwrap((_psi_factor(d, pts) * _normal_table(m, zs)) @ d.weights, single)


def _hz_table(m: DirLinMixture, zs: np.ndarray) -> np.ndarray:
    diff = zs[:, None] - m.means[None, :]
    s2 = m.sigmas[None, :] ** 2
    return _normal_table(m, zs) * (diff * diff / (s2 * s2) - 1.0 / s2)


def hz_dirlin(m: DirLinMixture, x, z):
    """Second partial derivative of the joint density in z."""
    d = m.directional
    pts, single = _points(x, d.q)
    zs = np.broadcast_to(np.asarray(z, dtype=float), (pts.shape[0],))
    dens = np.exp(_log_vmf_table(d, pts))
    return _unwrap((dens * _hz_table(m, zs)) @ d.weights, single)


def normal_convolutions(means: np.ndarray, sigmas: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # int phi_i phi_j, int phi_i phi_j'' and int phi_i'' phi_j'' as phi_s derivatives at m_i - m_j
    d = means[:, None] - means[None, :]
    s2 = sigmas[:, None] ** 2 + sigmas[None, :] ** 2
    base = normal_pdf(d, 0.0, np.sqrt(s2))
    second = base * (d * d / (s2 * s2) - 1.0 / s2)
    fourth = base * (d**4 / s2**4 - 6.0 * d * d / s2**3 + 3.0 / (s2 * s2))
    return base, second, fourth


@dataclass(frozen=True)
class Curvature:
    R_psi: Optional[float] = None
    I_psi2: Optional[float] = None
    I_hz2: Optional[float] = None
    I_cross: Optional[float] = None


def curvature_functionals(m: Mixture, grid: SphereGrid) -> Curvature:
    """R(Psi) for a directional target; I[Psi_x^2], I[H_z^2], I[Psi_x H_z] for a directional-linear one.

    The sphere factor is integrated on `grid`; the linear factor of each pair of
    components is a Gaussian convolution and is exact.
    """
    d = _dir_part(m)
    if grid.q != d.q:
        raise DomainError(f"grid is on the {grid.q}-sphere, model on the {d.q}-sphere")
    A = _psi_factor(d, grid.nodes)
    p = d.weights
    AA = (A * grid.weights[:, None]).T @ A
    if isinstance(m, DirMixture):
        return Curvature(R_psi=float(p @ AA @ p))

    F = np.exp(_log_vmf_table(d, grid.nodes))
    FF = (F * grid.weights[:, None]).T @ F
    AF = (A * grid.weights[:, None]).T @ F
    base, second, fourth = normal_convolutions(m.means, m.sigmas)
    return Curvature(
        I_psi2=float(p @ (AA * base) @ p),
        I_hz2=float(p @ (FF * fourth) @ p),
        I_cross=float(p @ (AF * second) @ p),
    )


def uniform_gap(m: DirMixture, grid: SphereGrid) -> float:
    """int (f - 1/omega_q)^2, the limit of the exact MISE as h grows."""
    inv_omega = math.exp(-log_surface_area(m.q))
    return integrate_sphere(lambda x: (mixture_density(m, x) - inv_omega) ** 2, grid)


# ---------- transforms ----------
def rotate(m: Mixture, Q: np.ndarray):
    Q = np.asarray(Q, dtype=float)
    d = _dir_part(m)
    comps = tuple(VmfComponent(Q @ c.mu, c.kappa) for c in d.components)
    if isinstance(m, DirLinMixture):
        return DirLinMixture(m.weights, comps, m.lin)
    return DirMixture(m.weights, comps)


def empirical_mixture(sample: DirSample, h_p: float, g_p: Optional[float] = None) -> Mixture:
    """The smooth-bootstrap pilot estimate as an equal-weight mixture centred at the data."""
    if not h_p > 0:
        raise DomainError(f"pilot h must be > 0, got {h_p!r}")
    n = sample.n
    weights = np.full(n, 1.0 / n)
    kappa = 1.0 / (h_p * h_p)
    comps = tuple(VmfComponent(x, kappa) for x in sample.points)
    if isinstance(sample, DirLinSample):
        if g_p is None or not g_p > 0:
            raise DomainError(f"pilot g must be > 0, got {g_p!r}")
        return DirLinMixture(weights, comps, tuple(NormalComponent(z, g_p) for z in sample.z))
    return DirMixture(weights, comps)


# ---------- sampling ----------
def _uniform_directions(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((k, dim))
    return g / np.linalg.norm(g, axis=1)[:, None]


def _truncated_exp(rng: np.random.Generator, k: int, kappa: float) -> np.ndarray:
    # inverse CDF of the density prop. to e^{kappa t} on [-1, 1]
    u = rng.random(k)
    return 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kappa)) / kappa


def _draw_t(rng: np.random.Generator, k: int, kappa: float, q: int) -> np.ndarray:
    """t = x^T mu from the density prop. to e^{kappa t} (1 - t^2)^{q/2 - 1}."""
    if q == 2:
        return _truncated_exp(rng, k, kappa)
    # q = 3: exponential proposal, accept with probability (1 - t^2)^{q/2 - 1}
    out = np.empty(0)
    drawn = accepted = 0
    while out.size < k:
        t = _truncated_exp(rng, _REJECTION_BATCH, kappa)
        keep = rng.random(_REJECTION_BATCH) < (1.0 - t * t) ** (0.5 * q - 1.0)
        out = np.concatenate([out, t[keep]])
        drawn += _REJECTION_BATCH
        accepted += int(keep.sum())
    logger.debug(f"t rejection sampler kappa={kappa:.4g} q={q}: acceptance {accepted / drawn:.3f}")
    return out[:k]


def sample_vmf(c: VmfComponent, k: int, rng: np.random.Generator) -> np.ndarray:
    """k draws from vMF(mu, kappa) through the tangent-normal decomposition."""
    q = c.q
    if k == 0:
        return np.empty((0, q + 1))
    if c.kappa < UNIFORM_KAPPA:
        return _uniform_directions(rng, k, q + 1)
    basis = complete_basis(c.mu).columns
    if q == 1:
        theta = rng.vonmises(0.0, c.kappa, k)
        return np.cos(theta)[:, None] * c.mu[None, :] + np.sin(theta)[:, None] * basis[:, 0][None, :]
    t = _draw_t(rng, k, c.kappa, q)
    xi = _uniform_directions(rng, k, q)
    return t[:, None] * c.mu[None, :] + np.sqrt(1.0 - t * t)[:, None] * (xi @ basis.T)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(m: Union[Mixture, LinMixture], n: int, seed=None):
    """n i.i.d. draws from a mixture; deterministic for a given seed."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = _rng(seed)
    if isinstance(m, LinMixture):
        labels = rng.choice(len(m.components), size=n, p=m.weights)
        return rng.normal(m.means[labels], m.sigmas[labels])

    d = _dir_part(m)
    labels = rng.choice(d.r, size=n, p=d.weights)
    points = np.empty((n, d.q + 1))
    for j, comp in enumerate(d.components):
        idx = np.flatnonzero(labels == j)
        points[idx] = sample_vmf(comp, idx.size, rng)
    if isinstance(m, DirLinMixture):
        z = rng.normal(m.means[labels], m.sigmas[labels])
        return DirLinSample(points=points, z=z, labels=labels)
    return DirSample(points=points, labels=labels)


# ---------- reference targets ----------
_REFERENCE_WEIGHTS = (0.4, 0.4, 0.2)
_REFERENCE_KAPPAS = (2.0, 10.0, 2.0)
_REFERENCE_NORMALS = ((0.0, 0.5), (1.0, 1.0), (2.0, 1.0))


def _reference_means(q: int) -> Sequence[np.ndarray]:
    first, last = np.zeros(q + 1), np.zeros(q + 1)
    first[0], last[-1] = 1.0, 1.0
    return first, last, -first


def _weights() -> np.ndarray:
    return np.array(_REFERENCE_WEIGHTS)


def linear_reference() -> LinMixture:
    """2/5 N(0, 1/4) + 2/5 N(1, 1) + 1/5 N(2, 1)."""
    return LinMixture(_weights(), tuple(NormalComponent(mm, s) for mm, s in _REFERENCE_NORMALS))


def directional_reference(q: int) -> DirMixture:
    """2/5 vM((1, 0_q), 2) + 2/5 vM((0_q, 1), 10) + 1/5 vM((-1, 0_q), 2)."""
    comps = tuple(VmfComponent(mu, k) for mu, k in zip(_reference_means(q), _REFERENCE_KAPPAS))
    return DirMixture(_weights(), comps)


def dirlin_reference(q: int) -> DirLinMixture:
    """The directional reference mixture paired with the linear reference normals."""
    d = directional_reference(q)
    return DirLinMixture(d.weights, d.components, linear_reference().components)
