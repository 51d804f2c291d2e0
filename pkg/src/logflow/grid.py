"""Uniform box grids in 1-3 dimensions with second-order finite-difference calculus.

The central state object is a scalar field sampled on [-L, L]^n with uniform
spacing h = 2L/(m-1).  All derivative operators use second-order central
stencils on interior nodes and second-order one-sided stencils on the boundary
layer, so polynomials of total degree two are differentiated exactly
everywhere.  Mixed second derivatives are iterated first differences, assigned
once per unordered index pair, which makes the Hessian symmetric bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import EmptyCoincidenceError, NonConvexityError

__all__ = [
    "BoxDomain",
    "GridFunction",
    "HessianField",
    "gradient",
    "hessian",
    "log_det_hessian",
    "hessian_eigen_bounds",
    "third_derivative_norm",
    "derivative_sup_norm",
    "sample",
    "sample_stack",
    "coincident_index_sets",
]


def _sl(ndim: int, axis: int, s: slice) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


@dataclass(frozen=True)
class BoxDomain:
    """Uniform grid on the box [-L, L]^n.

    ``margin`` counts extra boundary layers (beyond the outermost one) that are
    excluded from interior norms; wide stencils such as third and fourth
    derivatives are pure-central on the remaining interior when margin >= 2.
    """

    n: int
    half_width: float
    m: int
    margin: int = 2

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.m < 5:
            raise ValueError(f"need at least 5 points per axis, got m={self.m}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if 2 * (self.margin + 1) >= self.m:
            raise ValueError("margin leaves no interior nodes")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.m - 1)

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.n

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.m)

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*([self.axis] * self.n), indexing="ij"))

    def points(self) -> np.ndarray:
        """All node coordinates, shape (m^n, n), row-major."""
        grids = self.meshgrid()
        return np.stack([g.ravel() for g in grids], axis=-1)

    def interior(self) -> tuple:
        """Slices selecting the monitored interior (margin + 1 layers removed)."""
        k = self.margin + 1
        return tuple(slice(k, self.m - k) for _ in range(self.n))

    def nonring(self) -> tuple:
        """Slices selecting everything but the outermost layer."""
        return tuple(slice(1, self.m - 1) for _ in range(self.n))

    def window(self, half: float) -> tuple:
        """Slices for the centred sub-box |x_i| <= half."""
        inside = np.flatnonzero(np.abs(self.axis) <= half + 1e-12)
        if inside.size == 0:
            raise ValueError("window does not contain any grid node")
        lo, hi = inside[0], inside[-1] + 1
        return tuple(slice(lo, hi) for _ in range(self.n))

    def ring_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[self.nonring()] = False
        return mask

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.half_width, "m": self.m, "margin": self.margin}

    @classmethod
    def from_dict(cls, d: dict) -> "BoxDomain":
        return cls(n=int(d["n"]), half_width=float(d["L"]), m=int(d["m"]),
                   margin=int(d.get("margin", 2)))


@dataclass
class GridFunction:
    """Scalar field sampled on a :class:`BoxDomain`; values are never mutated."""

    domain: BoxDomain
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.domain.shape:
            raise ValueError(
                f"values shape {self.values.shape} != domain shape {self.domain.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function contains non-finite values")

    def with_values(self, values: np.ndarray, label: str | None = None) -> "GridFunction":
        return GridFunction(self.domain, values, self.label if label is None else label)

    def copy(self) -> "GridFunction":
        return GridFunction(self.domain, self.values.copy(), self.label)

    def interior_max_abs(self) -> float:
        return float(np.max(np.abs(self.values[self.domain.interior()])))

    @classmethod
    def from_callable(cls, domain: BoxDomain, fn: Callable, label: str = "") -> "GridFunction":
        """Sample ``fn`` on the grid; ``fn`` takes the n meshgrid arrays."""
        vals = fn(*domain.meshgrid())
        return cls(domain, np.broadcast_to(np.asarray(vals, dtype=np.float64),
                                           domain.shape).copy(), label)


# ---------------------------------------------------------------------------
# derivative stencils
# ---------------------------------------------------------------------------

def axis_diff(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """First derivative along one axis, central interior, one-sided O(h^2) ends."""
    return np.gradient(values, h, axis=axis, edge_order=2)


def axis_diff2(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along one axis, central interior, one-sided O(h^2) ends."""
    nd = values.ndim
    out = np.empty_like(values)
    c0 = values[_sl(nd, axis, slice(None, -2))]
    c1 = values[_sl(nd, axis, slice(1, -1))]
    c2 = values[_sl(nd, axis, slice(2, None))]
    out[_sl(nd, axis, slice(1, -1))] = (c0 - 2.0 * c1 + c2) / (h * h)
    f = [values[_sl(nd, axis, slice(k, k + 1))] for k in range(4)]
    out[_sl(nd, axis, slice(0, 1))] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    b = [values[_sl(nd, axis, slice(-k - 1, None if k == 0 else -k))] for k in range(4)]
    out[_sl(nd, axis, slice(-1, None))] = (2.0 * b[0] - 5.0 * b[1] + 4.0 * b[2] - b[3]) / (h * h)
    return out


def gradient(u: GridFunction) -> np.ndarray:
    """Nodewise gradient, shape (n, *grid_shape)."""
    h = u.domain.h
    return np.stack([axis_diff(u.values, h, ax) for ax in range(u.domain.n)])


# ---------------------------------------------------------------------------
# Hessian fields
# ---------------------------------------------------------------------------

class HessianField:
    """Per-node symmetric n x n matrix of second differences of a grid function."""

    def __init__(self, domain: BoxDomain, mats: np.ndarray):
        self.domain = domain
        self.mats = mats  # shape (*grid_shape, n, n)
        self._lmin = None
        self._lmax = None

    # -- determinants / inverses (closed forms, n <= 3) ---------------------

    def det(self) -> np.ndarray:
        a = self.mats
        n = self.domain.n
        if n == 1:
            return a[..., 0, 0].copy()
        if n == 2:
            return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] ** 2
        m00, m01, m02 = a[..., 0, 0], a[..., 0, 1], a[..., 0, 2]
        m11, m12, m22 = a[..., 1, 1], a[..., 1, 2], a[..., 2, 2]
        return (m00 * (m11 * m22 - m12 ** 2)
                - m01 * (m01 * m22 - m12 * m02)
                + m02 * (m01 * m12 - m11 * m02))

    def inverse(self) -> np.ndarray:
        a = self.mats
        n = self.domain.n
        d = self.det()
        if n == 1:
            inv = np.empty_like(a)
            inv[..., 0, 0] = 1.0 / a[..., 0, 0]
            return inv
        if n == 2:
            inv = np.empty_like(a)
            inv[..., 0, 0] = a[..., 1, 1] / d
            inv[..., 1, 1] = a[..., 0, 0] / d
            inv[..., 0, 1] = inv[..., 1, 0] = -a[..., 0, 1] / d
            return inv
        m00, m01, m02 = a[..., 0, 0], a[..., 0, 1], a[..., 0, 2]
        m11, m12, m22 = a[..., 1, 1], a[..., 1, 2], a[..., 2, 2]
        inv = np.empty_like(a)
        inv[..., 0, 0] = (m11 * m22 - m12 ** 2) / d
        inv[..., 1, 1] = (m00 * m22 - m02 ** 2) / d
        inv[..., 2, 2] = (m00 * m11 - m01 ** 2) / d
        inv[..., 0, 1] = inv[..., 1, 0] = (m02 * m12 - m01 * m22) / d
        inv[..., 0, 2] = inv[..., 2, 0] = (m01 * m12 - m02 * m11) / d
        inv[..., 1, 2] = inv[..., 2, 1] = (m01 * m02 - m00 * m12) / d
        return inv

    # -- eigenvalue fields ---------------------------------------------------

    def eigen_fields(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodewise (lambda_min, lambda_max); closed form for n <= 2, Jacobi for n = 3."""
        if self._lmin is not None:
            return self._lmin, self._lmax
        a = self.mats
        n = self.domain.n
        if n == 1:
            lmin = lmax = a[..., 0, 0]
        elif n == 2:
            mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
            rad = np.sqrt((0.5 * (a[..., 0, 0] - a[..., 1, 1])) ** 2 + a[..., 0, 1] ** 2)
            lmin, lmax = mean - rad, mean + rad
        else:
            ev = _jacobi_eigvals_sym3(a)
            lmin, lmax = ev[..., 0], ev[..., 2]
        self._lmin, self._lmax = lmin, lmax
        return lmin, lmax

    def eigen_bounds(self, region: str | tuple = "interior") -> tuple[float, float]:
        lmin, lmax = self.eigen_fields()
        sl = self._region(region)
        return float(np.min(lmin[sl])), float(np.max(lmax[sl]))

    def is_strictly_convex(self, region: str | tuple = "nonring", slack: float = 0.0) -> bool:
        """Sylvester criterion on every node of the region."""
        sl = self._region(region)
        a = self.mats[sl]
        n = self.domain.n
        if np.any(a[..., 0, 0] <= slack):
            return False
        if n == 1:
            return True
        m2 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] ** 2
        if np.any(m2 <= slack):
            return False
        if n == 2:
            return True
        m00, m01, m02 = a[..., 0, 0], a[..., 0, 1], a[..., 0, 2]
        m11, m12, m22 = a[..., 1, 1], a[..., 1, 2], a[..., 2, 2]
        det3 = (m00 * (m11 * m22 - m12 ** 2)
                - m01 * (m01 * m22 - m12 * m02)
                + m02 * (m01 * m12 - m11 * m02))
        return not np.any(det3 <= slack)

    def _region(self, region: str | tuple) -> tuple:
        if region == "interior":
            return self.domain.interior()
        if region == "nonring":
            return self.domain.nonring()
        if region == "all":
            return tuple(slice(None) for _ in range(self.domain.n))
        return region


def _jacobi_eigvals_sym3(mats: np.ndarray, max_sweeps: int = 12,
                         tol: float = 1e-14) -> np.ndarray:
    """Vectorised cyclic Jacobi eigenvalues for symmetric 3x3 matrices.

    Returns sorted eigenvalues, shape (*batch, 3).
    """
    a = np.array(mats, dtype=np.float64, copy=True)
    scale = np.maximum(np.max(np.abs(a), axis=(-2, -1)), 1e-300)
    for _ in range(max_sweeps):
        off = np.abs(a[..., 0, 1]) + np.abs(a[..., 0, 2]) + np.abs(a[..., 1, 2])
        if np.all(off <= tol * scale):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[..., p, q]
            active = np.abs(apq) > tol * scale
            if not np.any(active):
                continue
            app, aqq = a[..., p, p], a[..., q, q]
            safe_apq = np.where(active, apq, 1.0)
            theta = (aqq - app) / (2.0 * safe_apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            r = 3 - p - q  # the remaining index
            arp, arq = a[..., r, p], a[..., r, q]
            new_rp = c * arp - s * arq
            new_rq = s * arp + c * arq
            a[..., p, p] = app - t * apq
            a[..., q, q] = aqq + t * apq
            a[..., p, q] = a[..., q, p] = 0.0
            a[..., r, p] = a[..., p, r] = new_rp
            a[..., r, q] = a[..., q, r] = new_rq
    ev = np.stack([a[..., 0, 0], a[..., 1, 1], a[..., 2, 2]], axis=-1)
    ev.sort(axis=-1)
    return ev


def hessian(u: GridFunction) -> HessianField:
    """Second differences: direct stencils on the diagonal, iterated firsts mixed.

    The mixed entry is computed once per unordered pair and mirrored, so the
    matrix is symmetric by construction at every node.
    """
    n, h = u.domain.n, u.domain.h
    mats = np.empty(u.domain.shape + (n, n), dtype=np.float64)
    grads = [axis_diff(u.values, h, ax) for ax in range(n)]
    for i in range(n):
        mats[..., i, i] = axis_diff2(u.values, h, i)
        for j in range(i + 1, n):
            mixed = axis_diff(grads[i], h, j)
            mats[..., i, j] = mixed
            mats[..., j, i] = mixed
    return HessianField(u.domain, mats)


def hessian_eigen_bounds(H: HessianField, region: str | tuple = "interior") -> tuple[float, float]:
    return H.eigen_bounds(region)


def log_det_hessian(u: GridFunction, region: str | tuple = "all",
                    H: HessianField | None = None) -> GridFunction:
    """Nodewise (1/n) ln det D2u.

    Raises :class:`NonConvexityError` if the Hessian fails strict positive
    definiteness anywhere in ``region`` (Sylvester minors); values outside the
    region are still filled wherever the determinant is positive.
    """
    if H is None:
        H = hessian(u)
    n = u.domain.n
    if not H.is_strictly_convex(region):
        raise NonConvexityError(
            f"det D2u <= 0 or lambda_min <= 0 on region {region!r} of {u.label or 'field'}")
    det = H.det()
    det = np.where(det > 0.0, det, np.nan)
    vals = np.log(det) / n
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return GridFunction(u.domain, vals, label=f"logdet[{u.label}]")


# ---------------------------------------------------------------------------
# higher derivatives
# ---------------------------------------------------------------------------

def _third_tensor(u: GridFunction, H: HessianField | None = None) -> np.ndarray:
    """Full D3 tensor, shape (*grid, n, n, n): T[..., l, i, j] = d_l H_ij."""
    if H is None:
        H = hessian(u)
    n, h = u.domain.n, u.domain.h
    T = np.empty(u.domain.shape + (n, n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            for l in range(n):
                d = axis_diff(H.mats[..., i, j], h, l)
                T[..., l, i, j] = d
                T[..., l, j, i] = d
    return T


def _fourth_tensor(u: GridFunction, H: HessianField | None = None) -> np.ndarray:
    """Full D4 tensor, shape (*grid, n, n, n, n): second differences of H entries."""
    if H is None:
        H = hessian(u)
    n, h = u.domain.n, u.domain.h
    T = np.empty(u.domain.shape + (n, n, n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            entry = H.mats[..., i, j]
            firsts = [axis_diff(entry, h, ax) for ax in range(n)]
            for k in range(n):
                for l in range(k, n):
                    d = axis_diff2(entry, h, k) if k == l else axis_diff(firsts[k], h, l)
                    for a, b in ((i, j), (j, i)) if i != j else ((i, j),):
                        T[..., k, l, a, b] = d
                        T[..., l, k, a, b] = d
    return T


def third_derivative_norm(u: GridFunction, H: HessianField | None = None) -> float:
    """Sup over the interior of the Frobenius norm of the third-derivative tensor."""
    T = _third_tensor(u, H)
    frob = np.sqrt(np.sum(T * T, axis=(-3, -2, -1)))
    return float(np.max(frob[u.domain.interior()]))


def derivative_sup_norm(u: GridFunction, order: int) -> float:
    """Interior sup of the Frobenius norm of the derivative tensor of given order."""
    if order == 3:
        return third_derivative_norm(u)
    if order == 4:
        T = _fourth_tensor(u)
        frob = np.sqrt(np.sum(T * T, axis=(-4, -3, -2, -1)))
        return float(np.max(frob[u.domain.interior()]))
    raise ValueError("only derivative orders 3 and 4 are monitored")


# ---------------------------------------------------------------------------
# off-node sampling and coincident-node bookkeeping
# ---------------------------------------------------------------------------

def sample(field: np.ndarray | GridFunction, domain_or_points, points=None,
           order: int = 3) -> np.ndarray:
    """Interpolate a nodal array at arbitrary points inside the box.

    ``order=3`` is cubic-spline interpolation (used wherever off-node values
    feed second-order comparisons), ``order=1`` is multilinear.
    """
    if isinstance(field, GridFunction):
        domain, values = field.domain, field.values
        pts = np.asarray(domain_or_points, dtype=np.float64)
    else:
        domain, values = domain_or_points, np.asarray(field)
        pts = np.asarray(points, dtype=np.float64)
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != domain.n:
        raise ValueError(f"points must have {domain.n} coordinates")
    if np.any(np.abs(pts) > domain.half_width + 1e-9):
        raise ValueError("sample point outside the computational box")
    coords = (pts + domain.half_width) / domain.h  # index space
    return ndimage.map_coordinates(values, coords.T, order=order, mode="nearest")


def sample_stack(fields: np.ndarray, domain: BoxDomain, pts: np.ndarray,
                 order: int = 3) -> np.ndarray:
    """Sample a stack of nodal arrays (k, *grid_shape) -> (npts, k)."""
    return np.stack([sample(f, domain, pts, order=order) for f in fields], axis=-1)


def coincident_index_sets(domain: BoxDomain, R: float):
    """Index tuples (I_x, I_Rx) with x and Rx both grid nodes.

    Requires an odd point count so the origin is a node.  Works for integer R
    and reciprocals of integers; raises :class:`EmptyCoincidenceError` when the
    coincident set contains nothing but the origin.
    """
    if domain.m % 2 == 0:
        raise EmptyCoincidenceError("coincident sampling needs an odd point count")
    K = (domain.m - 1) // 2
    ks = np.arange(-K, K + 1)
    scaled = R * ks
    rounded = np.rint(scaled)
    good = (np.abs(scaled - rounded) < 1e-9) & (np.abs(rounded) <= K)
    ks = ks[good]
    if ks.size <= 1:
        raise EmptyCoincidenceError(f"no coincident nodes for R={R}")
    src_axis = ks + K
    dst_axis = np.rint(R * ks).astype(int) + K
    src = np.ix_(*([src_axis] * domain.n))
    dst = np.ix_(*([dst_axis] * domain.n))
    return src, dst
