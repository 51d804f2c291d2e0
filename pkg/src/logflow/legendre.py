"""Discrete Legendre transform and the flow's exact self-duality check.

u*(y) = sup_x (<x, y> - u(x)) is evaluated by a max over grid nodes followed by
one local quadratic refinement around the arg-max node, which restores O(h^2)
accuracy (and is exact for quadratic u).  For strictly convex smooth u the
conjugate satisfies D2u*(Du(x)) = (D2u(x))^{-1}; for the logarithmic gradient
flow the conjugate of a solution solves the same equation, because the
transform F*(M) = -F(M^{-1}) of F = (1/n) ln det fixes F.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvexityError, RangeError
from .grid import (BoxDomain, GridFunction, gradient, hessian, log_det_hessian)

__all__ = [
    "auto_dual_domain",
    "legendre_transform",
    "duality_involution_check",
    "dual_flow_check",
    "eigenvalue_swap_gap",
    "young_gap",
]

_CHUNK = 512


def auto_dual_domain(u: GridFunction, m: int | None = None,
                     shrink: float = 0.8) -> BoxDomain:
    """Symmetric dual box inside the sampled gradient range.

    The half-width is ``shrink`` times the largest symmetric interval that the
    per-axis gradient ranges support, which keeps every dual node away from
    the gradient-range boundary where the conjugate degenerates.
    """
    g = gradient(u)
    half = np.inf
    for i in range(u.domain.n):
        lo, hi = float(np.min(g[i])), float(np.max(g[i]))
        if not (lo < 0.0 < hi):
            raise RangeError("gradient range does not surround the origin; "
                             "supply a dual box explicitly")
        half = min(half, -lo, hi)
    return BoxDomain(n=u.domain.n, half_width=shrink * half,
                     m=u.domain.m if m is None else m, margin=u.domain.margin)


def legendre_transform(u: GridFunction, y_domain: BoxDomain | None = None, *,
                       refine: bool = True) -> GridFunction:
    """Convex conjugate sampled on the dual box.

    Raises :class:`RangeError` when the discrete arg-max for some dual node
    sits on the outermost grid layer, which signals that the requested dual
    point lies outside (or too close to the edge of) the sampled gradient
    range.
    """
    dom = u.domain
    H = hessian(u)
    lo, _ = H.eigen_bounds("all")
    if lo <= 0.0:
        raise NonConvexityError("conjugation needs strict convexity on the grid")
    if y_domain is None:
        y_domain = auto_dual_domain(u)

    x_pts = dom.points()                       # (N, n)
    u_flat = u.values.ravel()
    y_pts = y_domain.points()                  # (M, n)

    g = gradient(u)
    grad_flat = np.stack([g[i].ravel() for i in range(dom.n)], axis=-1)
    inv_flat = H.inverse().reshape(-1, dom.n, dom.n)
    if refine:
        # Third-order nodal Taylor term plus removal of the central-difference
        # gradient bias (h^2/6) u_iii: both keep the refinement error and its
        # arg-max switching jumps at O(h^4), so second differences of the
        # conjugate remain second-order accurate.  Quadratics stay exact.
        from .grid import _third_tensor
        third_flat = _third_tensor(u, H).reshape(-1, dom.n, dom.n, dom.n)
        bias = np.stack([third_flat[:, i, i, i] for i in range(dom.n)], axis=-1)
        grad_flat = grad_flat - (dom.h ** 2 / 6.0) * bias

    m = dom.m
    star = np.empty(y_pts.shape[0])
    for start in range(0, y_pts.shape[0], _CHUNK):
        block = y_pts[start:start + _CHUNK]
        scores = block @ x_pts.T - u_flat[None, :]
        best = np.argmax(scores, axis=1)
        # arg-max on the outermost layer: dual point outside the gradient hull
        multi = np.unravel_index(best, dom.shape)
        on_edge = np.zeros(best.shape, dtype=bool)
        for axis_idx in multi:
            on_edge |= (axis_idx == 0) | (axis_idx == m - 1)
        if np.any(on_edge):
            k = int(np.flatnonzero(on_edge)[0])
            raise RangeError(f"dual point {block[k]} outside the sampled gradient range")
        vals = scores[np.arange(block.shape[0]), best]
        if refine:
            resid = block - grad_flat[best]          # y - Du(x*)
            step = np.einsum("kij,kj->ki", inv_flat[best], resid)
            vals = vals + 0.5 * np.einsum("ki,ki->k", resid, step)
            vals = vals - np.einsum("kijl,ki,kj,kl->k",
                                    third_flat[best], step, step, step) / 6.0
        star[start:start + _CHUNK] = vals
    return GridFunction(y_domain, star.reshape(y_domain.shape),
                        label=f"conjugate[{u.label}]")


def young_gap(u: GridFunction, u_star: GridFunction) -> tuple[float, float]:
    """(min over pairs of u(x) + u*(y) - <x,y>, max equality defect at y = Du(x)).

    The first value is nonnegative by construction; the second measures how
    sharply equality is attained at the dual point of each interior node whose
    gradient lands inside the dual box.
    """
    dom = u.domain
    x_pts = dom.points()
    u_flat = u.values.ravel()
    y_pts = u_star.domain.points()
    star_flat = u_star.values.ravel()
    worst_min = np.inf
    for start in range(0, y_pts.shape[0], _CHUNK):
        block = y_pts[start:start + _CHUNK]
        gap = (u_flat[None, :] + star_flat[start:start + _CHUNK, None]
               - block @ x_pts.T)
        worst_min = min(worst_min, float(np.min(gap)))

    from .grid import sample
    g = gradient(u)
    sl = dom.interior()
    grads = np.stack([g[i][sl].ravel() for i in range(dom.n)], axis=-1)
    inside = np.all(np.abs(grads) <= u_star.domain.half_width - 2 * u_star.domain.h,
                    axis=1)
    grads = grads[inside]
    xs = np.stack([grid[sl].ravel() for grid in dom.meshgrid()], axis=-1)[inside]
    uvals = u.values[sl].ravel()[inside]
    star_at = sample(u_star, grads, order=3)
    eq_defect = float(np.max(np.abs(uvals + star_at - np.sum(xs * grads, axis=1))))
    return worst_min, eq_defect


def duality_involution_check(u: GridFunction) -> float:
    """Max over interior samples of || D2u*(Du(x)) . D2u(x) - I ||_max."""
    from .grid import sample
    dom = u.domain
    u_star = legendre_transform(u)
    H = hessian(u)
    H_star = hessian(u_star)
    g = gradient(u)
    sl = dom.interior()
    pts = np.stack([g[i][sl].ravel() for i in range(dom.n)], axis=-1)
    keep = np.all(np.abs(pts) <= u_star.domain.half_width - 2 * u_star.domain.h, axis=1)
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise RangeError("no interior gradient lands inside the dual box")
    mats_x = H.mats[sl].reshape(-1, dom.n, dom.n)[keep]
    worst = 0.0
    star_entries = np.empty((pts.shape[0], dom.n, dom.n))
    for i in range(dom.n):
        for j in range(dom.n):
            star_entries[:, i, j] = sample(H_star.mats[..., i, j],
                                           u_star.domain, pts, order=3)
    prod = np.einsum("kij,kjl->kil", star_entries, mats_x)
    eye = np.eye(dom.n)
    worst = float(np.max(np.abs(prod - eye)))
    return worst


def eigenvalue_swap_gap(u: GridFunction, u_star: GridFunction | None = None
                        ) -> tuple[float, float]:
    """Defects of the dual eigenvalue inequalities.

    Returns (max(0, 1/lambda_max(u) - lambda_min(u*)),
             max(0, lambda_max(u*) - 1/lambda_min(u))); both vanish up to O(h)
    because the dual box samples a subset of the gradient image.
    """
    if u_star is None:
        u_star = legendre_transform(u)
    lo, hi = hessian(u).eigen_bounds("interior")
    lo_s, hi_s = hessian(u_star).eigen_bounds("interior")
    return max(0.0, 1.0 / hi - lo_s), max(0.0, hi_s - 1.0 / lo)


def dual_flow_check(snapshots: list, y_domain: BoxDomain | None = None) -> float:
    """Residual of the conjugated trajectory under the same flow equation.

    ``snapshots`` holds three (t, GridFunction) entries from a tau = 1
    trajectory, not necessarily equally spaced.  Each snapshot is conjugated
    onto one common dual box and the interior sup of
    d(u*)/dt - (1/n) ln det D2u* at the middle time is returned, with the
    time derivative taken by the second-order three-point formula.
    """
    if len(snapshots) != 3:
        raise ValueError("dual_flow_check needs exactly three snapshots")
    (t0, u0), (t1, u1), (t2, u2) = snapshots
    if not t0 < t1 < t2:
        raise ValueError("snapshot times must be strictly increasing")
    if y_domain is None:
        y_domain = auto_dual_domain(u1, shrink=0.75)
    stars = [legendre_transform(u, y_domain) for u in (u0, u1, u2)]
    ha, hb = t1 - t0, t2 - t1
    dstar_dt = (-hb / (ha * (ha + hb)) * stars[0].values
                + (hb - ha) / (ha * hb) * stars[1].values
                + ha / (hb * (ha + hb)) * stars[2].values)
    logdet = log_det_hessian(stars[1], region="interior").values
    resid = dstar_dt - logdet
    return float(np.max(np.abs(resid[y_domain.interior()])))
