# ~/dirkde/kde.py
# Directional and directional-linear kernel density estimators.
from dataclasses import dataclass
import logging
import math
from typing import Iterator, Optional, Union

import numpy as np

from errors import DomainError
from kernels import GAUSSIAN_KERNEL, VON_MISES_KERNEL, DirectionalKernel, LinearKernel, log_c_hq
from sphere import LineGrid, SphereGrid, UnitVector

logger = logging.getLogger("dirkde.kde")
# evaluation points whose norm is within this of 1 are not renormalized
UNIT_TOL = 4.0 * np.finfo(float).eps


# ---------- samples ----------
@dataclass(frozen=True)
class DirSample:
    points: np.ndarray  # (n, q+1), unit rows
    labels: Optional[np.ndarray] = None  # mixture component of each draw, when known

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise DomainError("a sample needs at least one point")
        if pts.shape[1] < 2:
            raise DomainError(f"points need q+1 >= 2 coordinates, got {pts.shape[1]}")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(~np.isfinite(norms)) or np.any(norms == 0):
            raise DomainError("sample contains a zero or non-finite direction")
        pts = pts / norms[:, None]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1] - 1


@dataclass(frozen=True)
class DirLinSample(DirSample):
    z: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        if self.z is None:
            raise DomainError("a directional-linear sample needs a linear coordinate")
        zz = np.asarray(self.z, dtype=float).ravel()
        if zz.size != self.n:
            raise DomainError(f"{self.n} directions but {zz.size} linear values")
        if not np.all(np.isfinite(zz)):
            raise DomainError("linear coordinate contains non-finite values")
        zz.setflags(write=False)
        object.__setattr__(self, "z", zz)

    @property
    def directional(self) -> DirSample:
        return DirSample(self.points, self.labels)


@dataclass(frozen=True)
class Bandwidths:
    h: float
    g: Optional[float] = None

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise DomainError(f"h must be > 0, got {self.h!r}")
        if self.g is not None and not (self.g > 0 and math.isfinite(self.g)):
            raise DomainError(f"g must be > 0, got {self.g!r}")


# ---------- kernel terms ----------
def _cosines(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    # coordinate loop instead of a BLAS product: each node gets the same rounding
    # no matter how many nodes are evaluated together
    acc = nodes[:, 0] * x[0]
    for k in range(1, x.size):
        acc = acc + nodes[:, k] * x[k]
    return acc


class _DirTerm:
    """c_{h,q}(L) L((1 - x^T X_i)/h^2) for one datum X_i over a block of nodes."""

    def __init__(self, L: DirectionalKernel, q: int, h: float):
        self.L = L
        self.kappa = 1.0 / (h * h)
        self.log_c = log_c_hq(L, q, h)
        self.c = None if L.is_von_mises else math.exp(self.log_c)

    def __call__(self, nodes: np.ndarray, datum: np.ndarray) -> np.ndarray:
        r = (1.0 - _cosines(nodes, datum)) * self.kappa
        if self.L.is_von_mises:
            return np.exp(self.log_c - r)
        return self.c * self.L(r)


def _lin_term(K: LinearKernel, zs: np.ndarray, datum: float, g: float) -> np.ndarray:
    return K((zs - datum) / g) / g


def _compensated_mean(terms: Iterator[np.ndarray], n: int, shape) -> np.ndarray:
    # Neumaier summation over sample rows
    total = np.zeros(shape)
    comp = np.zeros(shape)
    for term in terms:
        nxt = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - nxt) + term, (term - nxt) + total)
        total = nxt
    return (total + comp) / n


def _as_nodes(x, q: int) -> np.ndarray:
    if isinstance(x, UnitVector):
        x = x.coords
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.shape[1] != q + 1:
        raise DomainError(f"evaluation point has dimension {arr.shape[1]}, sample has {q + 1}")
    norms = np.linalg.norm(arr, axis=1)
    # rows already unit to rounding are used as given, so grid and pointwise calls see the same nodes
    off = np.abs(norms - 1.0) > UNIT_TOL
    if not np.any(off):
        return arr
    out = arr.copy()
    out[off] /= norms[off, None]
    return out


def _single(x) -> bool:
    if isinstance(x, UnitVector):
        return True
    return np.asarray(x).ndim == 1


# ---------- estimators ----------
def eval_dir(sample: DirSample, h: float, x, L: DirectionalKernel = VON_MISES_KERNEL) -> Union[float, np.ndarray]:
    """Directional estimator (c_{h,q}(L)/n) sum_i L((1 - x^T X_i)/h^2).

    `x` is one point (float result) or an (N, q+1) array of points.
    """
    bw = Bandwidths(h)
    nodes = _as_nodes(x, sample.q)
    term = _DirTerm(L, sample.q, bw.h)
    out = _compensated_mean((term(nodes, xi) for xi in sample.points), sample.n, nodes.shape[0])
    return float(out[0]) if _single(x) else out


def eval_dirlin(
    sample: DirLinSample,
    bw: Bandwidths,
    x,
    z,
    L: DirectionalKernel = VON_MISES_KERNEL,
    K: LinearKernel = GAUSSIAN_KERNEL,
) -> Union[float, np.ndarray]:
    """Directional-linear estimator (c_{h,q}(L)/(n g)) sum_i L((1 - x^T X_i)/h^2) K((z - Z_i)/g).

    Points are paired: x is (N, q+1) and z has N entries (or one point and one z).
    """
    if bw.g is None:
        raise DomainError("directional-linear estimation needs a linear bandwidth g")
    nodes = _as_nodes(x, sample.q)
    zs = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if zs.size != nodes.shape[0]:
        raise DomainError(f"{nodes.shape[0]} directions but {zs.size} linear values")
    term = _DirTerm(L, sample.q, bw.h)
    terms = (term(nodes, xi) * _lin_term(K, zs, zi, bw.g) for xi, zi in zip(sample.points, sample.z))
    out = _compensated_mean(terms, sample.n, nodes.shape[0])
    return float(out[0]) if _single(x) else out


def eval_linear(data: np.ndarray, g: float, z, K: LinearKernel = GAUSSIAN_KERNEL) -> np.ndarray:
    """Linear estimator (1/(n g)) sum_i K((z - Z_i)/g) at every entry of z."""
    if not g > 0:
        raise DomainError(f"g must be > 0, got {g!r}")
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 1:
        raise DomainError("a sample needs at least one point")
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    return _compensated_mean((_lin_term(K, zs, zi, g) for zi in data), data.size, zs.shape)


def eval_grid(
    sample: DirSample,
    bw: Bandwidths,
    grid: SphereGrid,
    lgrid: Optional[LineGrid] = None,
    L: DirectionalKernel = VON_MISES_KERNEL,
    K: LinearKernel = GAUSSIAN_KERNEL,
) -> np.ndarray:
    """Estimator over every grid node: shape (N,) on a sphere grid, (N, M) on sphere x line.

    Entry for entry identical to the pointwise estimators.
    """
    if grid.q != sample.q:
        raise DomainError(f"grid is on the {grid.q}-sphere, sample on the {sample.q}-sphere")
    term = _DirTerm(L, sample.q, bw.h)
    nodes = _as_nodes(grid.nodes, sample.q)
    if lgrid is None:
        return _compensated_mean((term(nodes, xi) for xi in sample.points), sample.n, grid.size)

    if not isinstance(sample, DirLinSample):
        raise DomainError("a line grid needs a directional-linear sample")
    if bw.g is None:
        raise DomainError("directional-linear estimation needs a linear bandwidth g")
    terms = (
        term(nodes, xi)[:, None] * _lin_term(K, lgrid.nodes, zi, bw.g)[None, :]
        for xi, zi in zip(sample.points, sample.z)
    )
    return _compensated_mean(terms, sample.n, (grid.size, lgrid.size))
