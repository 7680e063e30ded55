# ~/dirkde/sphere.py
# Geometry of the q-sphere and tensor quadrature over the sphere and sphere x line.
#
# Integrands are vectorized: a sphere integrand takes an (N, q+1) array of nodes and
# returns N values; a sphere-line integrand takes (nodes, z) and returns an (N, M) table.
from dataclasses import dataclass
import logging
import math
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space
from scipy.special import roots_jacobi, roots_legendre

from errors import DomainError, NonFiniteError
from special import log_surface_area

logger = logging.getLogger("dirkde.sphere")

SUPPORTED_Q = (1, 2, 3)
# |t| this close to 1 counts as a pole in the tangent-normal decomposition
POLE_TOL = 1e-12
# Gaussian tails are below 1e-14 past 8 standard deviations
LINE_SIGMAS = 8.0


# ---------- types ----------
@dataclass(frozen=True)
class UnitVector:
    coords: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.coords, dtype=float).ravel()
        if v.size < 2:
            raise DomainError(f"a point of the q-sphere needs q+1 >= 2 coordinates, got {v.size}")
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm == 0.0:
            raise DomainError("cannot normalize a zero or non-finite vector")
        v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "coords", v)

    @property
    def q(self) -> int:
        return self.coords.size - 1


@dataclass(frozen=True)
class TangentBasis:
    base: UnitVector
    columns: np.ndarray  # (q+1, q), orthonormal, orthogonal to base


@dataclass(frozen=True)
class SphereGrid:
    q: int
    nodes: np.ndarray  # (N, q+1)
    weights: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class LineGrid:
    nodes: np.ndarray
    weights: np.ndarray
    truncation: float
    center: float = 0.0

    @property
    def size(self) -> int:
        return self.weights.size


def _as_coords(x) -> np.ndarray:
    if isinstance(x, UnitVector):
        return x.coords
    return UnitVector(x).coords


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------- geometry ----------
def _omega(q: int) -> float:
    return math.exp(log_surface_area(q))


def surface_area(q: int) -> float:
    """omega_q = 2 pi^{(q+1)/2} / Gamma((q+1)/2)."""
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    return _omega(q)


def complete_basis(y) -> TangentBasis:
    """Orthonormal completion B_y of y: B_y^T y = 0 and B_y B_y^T = I - y y^T."""
    yv = y if isinstance(y, UnitVector) else UnitVector(y)
    cols = null_space(yv.coords.reshape(1, -1))
    return TangentBasis(base=yv, columns=_frozen(cols))


def tangent_normal(x, y) -> Tuple[float, np.ndarray, bool]:
    """Split x = t y + sqrt(1 - t^2) B_y xi.

    Returns (t, xi, degenerate). At the poles |t| = 1 the direction xi is undefined and
    a fixed unit vector is returned with degenerate=True.
    """
    xv, yv = _as_coords(x), _as_coords(y)
    if xv.size != yv.size:
        raise DomainError(f"dimension mismatch: {xv.size} vs {yv.size}")
    t = float(np.clip(xv @ yv, -1.0, 1.0))
    basis = complete_basis(yv).columns
    q = yv.size - 1
    if 1.0 - abs(t) <= POLE_TOL:
        logger.debug(f"tangent_normal at pole (t={t!r}); returning fixed direction")
        xi = np.zeros(q)
        xi[0] = 1.0
        return t, xi, True
    proj = basis.T @ (xv - t * yv)
    return t, proj / np.linalg.norm(proj), False


def rotation_to(pole) -> np.ndarray:
    """Orthogonal matrix [pole | B_pole]: its first column is the pole."""
    pv = _as_coords(pole)
    return np.column_stack([pv, complete_basis(pv).columns])


# ---------- sphere grids ----------
def _circle_nodes(resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(resolution) / resolution
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    weights = np.full(resolution, 2.0 * np.pi / resolution)
    return nodes, weights


def _t_rule(q: int, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    # nodes/weights for int_{-1}^{1} f(t) (1 - t^2)^{q/2 - 1} dt
    alpha = 0.5 * q - 1.0
    if alpha == 0.0:
        return roots_legendre(resolution)
    return roots_jacobi(resolution, alpha, alpha)


def _sub_resolution(q: int, resolution: int) -> int:
    # the azimuthal circle spans 2 pi against pi for the polar coordinate
    return 2 * resolution if q - 1 == 1 else resolution


def _base_grid(q: int, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    # grid with pole e_1: x = (t, sqrt(1 - t^2) xi)
    if q == 1:
        return _circle_nodes(resolution)
    t, wt = _t_rule(q, resolution)
    sub_nodes, sub_w = _base_grid(q - 1, _sub_resolution(q, resolution))
    s = np.sqrt(1.0 - t * t)
    nodes = np.concatenate(
        [
            np.repeat(t, sub_w.size)[:, None],
            (s[:, None, None] * sub_nodes[None, :, :]).reshape(-1, q),
        ],
        axis=1,
    )
    weights = np.outer(wt, sub_w).ravel()
    return nodes, weights


def build_sphere_grid(q: int, resolution: int, pole=None) -> SphereGrid:
    """Product quadrature on the q-sphere.

    q = 1 is the uniform trapezoid in angle. For q >= 2 the polar coordinate t = x^T pole
    uses Gauss-Jacobi nodes for the weight (1 - t^2)^{q/2 - 1} (Gauss-Legendre at q = 2),
    tensorized with a recursively built grid on the (q-1)-sphere. `pole` defaults to e_1.
    """
    if q not in SUPPORTED_Q:
        raise DomainError(f"sphere grids support q in {SUPPORTED_Q}, got {q}")
    if resolution < 8:
        raise DomainError(f"resolution must be >= 8, got {resolution}")
    nodes, weights = _base_grid(q, resolution)
    if pole is not None:
        frame = rotation_to(pole)
        if frame.shape[0] != q + 1:
            raise DomainError(f"pole has dimension {frame.shape[0]}, grid needs {q + 1}")
        nodes = nodes @ frame.T
    return SphereGrid(q=q, nodes=_frozen(nodes), weights=_frozen(weights))


def _geometric_shells(scale: float) -> list:
    edges = [0.0]
    width = min(scale, math.pi)
    while edges[-1] < math.pi:
        edges.append(min(edges[-1] + width, math.pi))
        width = edges[-1]
    return edges


def build_cap_grid(pole, scale: float, resolution: int = 32) -> SphereGrid:
    """Grid clustered around `pole` for integrands concentrated at angular scale `scale`.

    The polar angle is split into shells [0, s], [s, 2s], [2s, 4s], ... up to pi, each with
    its own Gauss-Legendre rule; the azimuthal part is a full (q-1)-sphere grid.
    """
    pv = _as_coords(pole)
    q = pv.size - 1
    if q not in SUPPORTED_Q:
        raise DomainError(f"cap grids support q in {SUPPORTED_Q}, got {q}")
    if not scale > 0:
        raise DomainError(f"scale must be > 0, got {scale!r}")
    u, wu = roots_legendre(resolution)
    thetas, wthetas = [], []
    edges = _geometric_shells(scale)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        thetas.append(lo + half * (u + 1.0))
        wthetas.append(half * wu)
    theta = np.concatenate(thetas)
    wtheta = np.concatenate(wthetas) * np.sin(theta) ** (q - 1)

    if q == 1:
        sub_nodes, sub_w = np.array([[1.0], [-1.0]]), np.ones(2)
    else:
        sub_nodes, sub_w = _base_grid(q - 1, _sub_resolution(q, resolution))

    local = np.concatenate(
        [
            np.repeat(np.cos(theta), sub_w.size)[:, None],
            (np.sin(theta)[:, None, None] * sub_nodes[None, :, :]).reshape(-1, q),
        ],
        axis=1,
    )
    nodes = local @ rotation_to(pv).T
    weights = np.outer(wtheta, sub_w).ravel()
    return SphereGrid(q=q, nodes=_frozen(nodes), weights=_frozen(weights))


def integrate_sphere(f: Callable[[np.ndarray], np.ndarray], grid: SphereGrid) -> float:
    vals = np.asarray(f(grid.nodes), dtype=float)
    if vals.shape != grid.weights.shape:
        vals = np.broadcast_to(vals, grid.weights.shape)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteError(f"integrand is not finite at sphere node {bad}")
    return float(grid.weights @ vals)


# ---------- line grids ----------
def build_line_grid(truncation: float, resolution: int = 256, center: float = 0.0) -> LineGrid:
    """Gauss-Legendre rule on [center - truncation, center + truncation]."""
    if not truncation > 0:
        raise DomainError(f"truncation must be > 0, got {truncation!r}")
    if resolution < 16:
        raise DomainError(f"line resolution must be >= 16, got {resolution}")
    u, w = roots_legendre(resolution)
    return LineGrid(
        nodes=_frozen(center + truncation * u),
        weights=_frozen(truncation * w),
        truncation=float(truncation),
        center=float(center),
    )


def line_window(means: Sequence[float], sigmas: Sequence[float], g: float = 0.0) -> Tuple[float, float]:
    """(center, truncation) covering every normal component and its kernel smoothing."""
    means = np.asarray(means, dtype=float)
    smax = float(np.max(sigmas))
    lo = float(means.min()) - LINE_SIGMAS * smax - LINE_SIGMAS * g
    hi = float(means.max()) + LINE_SIGMAS * smax + LINE_SIGMAS * g
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def integrate_line(f: Callable[[np.ndarray], np.ndarray], grid: LineGrid) -> float:
    vals = np.asarray(f(grid.nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("integrand is not finite on the line grid")
    return float(grid.weights @ vals)


def integrate_sphere_line(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray], sgrid: SphereGrid, lgrid: LineGrid
) -> float:
    """Tensor quadrature over sphere x window; f(nodes, z) returns an (N, M) table."""
    table = np.asarray(f(sgrid.nodes, lgrid.nodes), dtype=float)
    table = np.broadcast_to(table, (sgrid.size, lgrid.size))
    if not np.all(np.isfinite(table)):
        raise NonFiniteError("integrand is not finite on the sphere-line grid")
    return float(sgrid.weights @ table @ lgrid.weights)
