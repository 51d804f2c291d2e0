"""Solvers and certification for the self-expander Monge-Ampere equation.

The stationary profile of a self-similarly expanding flow solves

    det D2u = exp( n (u - <x, Du>/2) )

Two independent routes are implemented: radial shooting of the reduced ODE
u'' = (u'/r)^{1-n} exp(n (u - r u'/2)) from a regular series start at the
origin, and a damped Newton iteration on the discretised equation with
Dirichlet data on the boundary ring.  Certification reports Hessian bounds,
the degree-2 homogeneity defect of the profile's blow-down against its own
far-field quadratic, and the residual of the Bernstein-type identity
u^{ij} w_ij = <x, Dw>/2 for w = u - <x, Du>/2 (w is constant exactly on
quadratic solutions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .errors import (BlowupError, EmptyCoincidenceError, NewtonStall,
                     NonConvexityError, SingularStartError)
from .grid import (BoxDomain, GridFunction, HessianField, coincident_index_sets,
                   gradient, hessian)

__all__ = [
    "RadialProfile",
    "ExpanderSolution",
    "radial_shoot",
    "profile_to_grid",
    "expander_residual",
    "residual_sup",
    "newton_solve",
    "certify",
    "CertificationReport",
]

_CURVATURE_CAP = 1e6


# ---------------------------------------------------------------------------
# radial shooting
# ---------------------------------------------------------------------------

@dataclass
class RadialProfile:
    """Samples of (u, u', u'') along the radius, with dense evaluation."""

    n: int
    a: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    _sol: object = None

    def __call__(self, radii: np.ndarray) -> np.ndarray:
        """Profile values at arbitrary radii in [0, r_max]."""
        radii = np.asarray(radii, dtype=np.float64)
        flat = np.abs(radii).ravel()
        out = np.empty_like(flat)
        small = flat < self.r[0]
        # series start below the first sample: u = a + e^a r^2 / 2
        out[small] = self.a + 0.5 * math.exp(self.a) * flat[small] ** 2
        if np.any(~small):
            out[~small] = self._sol(flat[~small])[0]
        return out.reshape(radii.shape)


def _radial_rhs(n: int, a: float):
    def f(r, y):
        u, du = y
        w = n * (u - 0.5 * r * du)
        w = min(w, 700.0)  # keep exp finite; the blow-up event fires first
        if n == 1:
            d2 = math.exp(w)
        else:
            ratio = du / r
            if ratio <= 0.0:
                return [du, _CURVATURE_CAP * 2.0]
            d2 = ratio ** (1 - n) * math.exp(w)
        return [du, d2]
    return f


def radial_shoot(n: int, a: float, r_max: float, *, slope0: float = 0.0,
                 rtol: float = 1e-10, atol: float = 1e-12,
                 num: int = 513) -> RadialProfile:
    """Integrate the radial profile from u(0) = a, u'(0) = slope0 to r_max.

    Regularity at the origin forces u''(0) = exp(a); the integration starts at
    r0 = 1e-4 from the quadratic series.  A nonzero starting slope is only
    admissible on the line (n = 1), where the profile is just an off-centre
    solution rather than a genuinely radial one.
    """
    if n >= 2 and slope0 != 0.0:
        raise SingularStartError("u'(0) must vanish for n >= 2 (0/0 at the origin)")
    c0 = math.exp(a)
    if not 0.0 < c0 < _CURVATURE_CAP:
        raise BlowupError(f"starting curvature exp(a) = {c0:.3g} outside (0, 1e6)")
    r0 = 1e-4
    u_start = a + slope0 * r0 + 0.5 * c0 * r0 ** 2
    du_start = slope0 + c0 * r0

    f = _radial_rhs(n, a)
    d2_start = f(r0, [u_start, du_start])[1]
    if abs(d2_start - c0) > 0.02 * c0 + abs(slope0):
        raise SingularStartError(
            f"series start inconsistent: u''(r0) = {d2_start:.6g}, expected {c0:.6g}")

    def too_steep(r, y):
        return f(r, y)[1] - _CURVATURE_CAP
    too_steep.terminal = True

    def too_flat(r, y):
        return f(r, y)[1] - 1e-12
    too_flat.terminal = True

    sol = solve_ivp(f, (r0, r_max), [u_start, du_start], method="RK45",
                    rtol=rtol, atol=atol, dense_output=True,
                    events=[too_steep, too_flat])
    if sol.status == 1:
        raise BlowupError(f"curvature left (0, 1e6) at r = {sol.t[-1]:.6g}")
    if not sol.success:
        raise BlowupError(f"radial integration failed: {sol.message}")

    r = np.linspace(r0, r_max, num)
    y = sol.sol(r)
    d2 = np.array([f(rk, yk)[1] for rk, yk in zip(r, y.T)])
    return RadialProfile(n=n, a=a, r=r, u=y[0], du=y[1], d2u=d2, _sol=sol.sol)


def profile_to_grid(profile: RadialProfile, domain: BoxDomain,
                    label: str = "expander") -> GridFunction:
    """Sample u(|x|) on the grid through the dense ODE solution (no interpolation)."""
    grids = domain.meshgrid()
    radii = np.sqrt(sum(g ** 2 for g in grids))
    return GridFunction(domain, profile(radii), label=label)


def line_profile(a: float, slope0: float, half_width: float, *,
                 rtol: float = 1e-10, atol: float = 1e-12):
    """Two-sided 1-D expander solution with u(0) = a, u'(0) = slope0.

    On the line the stationary equation u'' = exp(u - x u'/2) is regular away
    from nothing, so both half-lines are integrated directly; a nonzero slope
    yields the genuinely non-quadratic (asymmetric) solutions whose far-field
    curvatures differ on the two sides.  Returns a vectorised callable u(x).
    """
    f = _radial_rhs(1, a)
    r0 = 1e-6
    c0 = math.exp(a)

    def shoot(sign):
        start = [a + slope0 * sign * r0 + 0.5 * c0 * r0 ** 2, slope0 + sign * c0 * r0]
        sol = solve_ivp(f, (sign * r0, sign * half_width), start, method="RK45",
                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise BlowupError(f"line integration failed: {sol.message}")
        return sol.sol

    right, left = shoot(+1), shoot(-1)

    def u(x):
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        out = np.empty_like(flat)
        mid = np.abs(flat) < r0
        out[mid] = a + slope0 * flat[mid] + 0.5 * c0 * flat[mid] ** 2
        pos = (~mid) & (flat > 0)
        neg = (~mid) & (flat < 0)
        if np.any(pos):
            out[pos] = right(flat[pos])[0]
        if np.any(neg):
            out[neg] = left(flat[neg])[0]
        return out.reshape(x.shape)

    return u


# ---------------------------------------------------------------------------
# residual and Newton iteration on the grid
# ---------------------------------------------------------------------------

def _pointwise_exponent(u: GridFunction) -> np.ndarray:
    g = gradient(u)
    grids = u.domain.meshgrid()
    xdu = sum(grids[i] * g[i] for i in range(u.domain.n))
    return u.domain.n * (u.values - 0.5 * xdu)


def expander_residual(u: GridFunction, H: HessianField | None = None) -> GridFunction:
    """Nodewise det D2u - exp(n (u - <x, Du>/2)); ring entries are zeroed."""
    if H is None:
        H = hessian(u)
    if not H.is_strictly_convex("nonring"):
        raise NonConvexityError("expander residual needs strict convexity")
    vals = H.det() - np.exp(_pointwise_exponent(u))
    vals[u.domain.ring_mask()] = 0.0
    return u.with_values(vals, label=f"residual[{u.label}]")


def residual_sup(u: GridFunction, region: str = "nonring") -> float:
    r = expander_residual(u)
    sl = u.domain.interior() if region == "interior" else u.domain.nonring()
    return float(np.max(np.abs(r.values[sl])))


@dataclass
class ExpanderSolution:
    u: GridFunction
    residual_norm: float
    iterations: int
    condition_B: tuple[float, float]

    def __post_init__(self):
        if not np.isfinite(self.residual_norm):
            raise ValueError("residual norm must be finite")
        if self.condition_B[0] <= 0.0:
            raise NonConvexityError("certified solutions must be strictly convex")


def _assemble_jacobian(u: GridFunction, H: HessianField) -> sparse.csr_matrix:
    """Jacobian of the discrete residual with respect to the non-ring unknowns.

    d(det D2u)[v] = det(D2u) u^{ij} v_ij,
    d(exp E)[v]   = exp(E) n (v - <x, Dv>/2).
    """
    dom = u.domain
    n, h, m = dom.n, dom.h, dom.m
    det = H.det()
    inv = H.inverse()
    expE = np.exp(_pointwise_exponent(u))
    grids = dom.meshgrid()

    inner = dom.nonring()
    idx_map = -np.ones(dom.shape, dtype=np.int64)
    n_unknown = int(np.prod([m - 2] * n))
    idx_map[inner] = np.arange(n_unknown).reshape([m - 2] * n)

    rows, cols, vals = [], [], []
    interior_idx = idx_map[inner].ravel()

    def add(offset, weight):
        # weight: array over the inner block; neighbour at node+offset
        nb = tuple(slice(1 + o, m - 1 + o) for o in offset)
        nb_idx = idx_map[nb].ravel()
        keep = nb_idx >= 0  # ring neighbours carry fixed Dirichlet data
        rows.append(interior_idx[keep])
        cols.append(nb_idx[keep])
        vals.append(weight.ravel()[keep])

    det_i = det[inner]
    expE_i = expE[inner]
    inv_i = inv[inner]

    centre = -expE_i * n
    for i in range(n):
        centre = centre + det_i * inv_i[..., i, i] * (-2.0 / h ** 2)
    add(tuple([0] * n), centre)

    for i in range(n):
        for s in (+1, -1):
            o = [0] * n
            o[i] = s
            w = det_i * inv_i[..., i, i] / h ** 2
            w = w + expE_i * n * s * grids[i][inner] / (4.0 * h)
            add(tuple(o), w)

    for i in range(n):
        for j in range(i + 1, n):
            for si in (+1, -1):
                for sj in (+1, -1):
                    o = [0] * n
                    o[i], o[j] = si, sj
                    w = det_i * 2.0 * inv_i[..., i, j] * (si * sj) / (4.0 * h ** 2)
                    add(tuple(o), w)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown))


def newton_solve(u_init: GridFunction, dirichlet: GridFunction | None = None, *,
                 tol: float = 1e-10, max_iter: int = 50,
                 min_step: float = 2.0 ** -20) -> ExpanderSolution:
    """Damped Newton iteration for the discrete self-expander equation.

    ``dirichlet`` supplies the fixed ring values (defaults to the ring of the
    initial guess).  The line search backtracks until the iterate stays
    strictly convex and the residual decreases; stagnation raises
    :class:`NewtonStall`.
    """
    dom = u_init.domain
    ring = dom.ring_mask()
    vals = u_init.values.copy()
    if dirichlet is not None:
        vals[ring] = dirichlet.values[ring]
    u = u_init.with_values(vals)

    H = hessian(u)
    if not H.is_strictly_convex("nonring"):
        raise NonConvexityError("initial guess is not strictly convex")

    inner = dom.nonring()

    def res_field(uu, HH):
        return (HH.det() - np.exp(_pointwise_exponent(uu)))[inner]

    R = res_field(u, H)
    rnorm = float(np.max(np.abs(R)))
    for it in range(1, max_iter + 1):
        if rnorm <= tol:
            lo, hi = H.eigen_bounds("interior")
            return ExpanderSolution(u=u, residual_norm=rnorm, iterations=it - 1,
                                    condition_B=(lo, hi))
        J = _assemble_jacobian(u, H)
        delta = spsolve(J, -R.ravel()).reshape(R.shape)
        step = 1.0
        while True:
            trial = u.values.copy()
            trial[inner] += step * delta
            u_try = u.with_values(trial)
            H_try = hessian(u_try)
            if H_try.is_strictly_convex("nonring"):
                R_try = res_field(u_try, H_try)
                r_try = float(np.max(np.abs(R_try)))
                if r_try < rnorm * (1.0 - 1e-4 * step) or r_try <= tol:
                    break
            step *= 0.5
            if step < min_step:
                raise NewtonStall(
                    f"line search stalled at iteration {it} (residual {rnorm:.3e})")
        u, H, R, rnorm = u_try, H_try, R_try, r_try

    if rnorm <= tol:
        lo, hi = H.eigen_bounds("interior")
        return ExpanderSolution(u=u, residual_norm=rnorm, iterations=max_iter,
                                condition_B=(lo, hi))
    raise NewtonStall(f"no convergence in {max_iter} iterations (residual {rnorm:.3e})")


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class CertificationReport:
    condition_B: tuple[float, float]
    condition_A_defect: float
    bernstein_residual: float
    w_range: float
    is_quadratic: bool
    residual_norm: float

    def to_dict(self) -> dict:
        return {
            "lambda_min": self.condition_B[0],
            "lambda_max": self.condition_B[1],
            "condition_A_defect": self.condition_A_defect,
            "bernstein_residual": self.bernstein_residual,
            "w_range": self.w_range,
            "is_quadratic": self.is_quadratic,
            "residual_norm": self.residual_norm,
        }


def bernstein_residual(u: GridFunction) -> float:
    """Interior sup of u^{ij} w_ij + (n/2) <x, Dw> with w = u - <x, Du>/2.

    On solutions of the expander equation, ln det D2u = n w, so differentiating
    gives u^{ij} u_ijk = n w_k while w_ij = -x_k u_ijk / 2; contracting yields
    u^{ij} w_ij = -(n/2) <x, Dw>.  The residual of that identity vanishes at
    second order on certified solutions and is identically zero (both sides)
    exactly when w is constant, i.e. for quadratic solutions.
    """
    dom = u.domain
    H = hessian(u)
    inv = H.inverse()
    g = gradient(u)
    grids = dom.meshgrid()
    w = u.values - 0.5 * sum(grids[i] * g[i] for i in range(dom.n))
    wf = u.with_values(w, label="bernstein-w")
    Hw = hessian(wf).mats
    gw = gradient(wf)
    lhs = np.einsum("...ij,...ij->...", inv, Hw)
    drift = 0.5 * dom.n * sum(grids[i] * gw[i] for i in range(dom.n))
    return float(np.max(np.abs((lhs + drift)[dom.interior()])))


def _w_field(u: GridFunction) -> np.ndarray:
    g = gradient(u)
    grids = u.domain.meshgrid()
    return u.values - 0.5 * sum(grids[i] * g[i] for i in range(u.domain.n))


def certify(u_or_solution, far_quadratic: np.ndarray | None = None,
            scales=(2.0, 4.0)) -> CertificationReport:
    """Certify a candidate expander: bounds, blow-down defect, Bernstein residual.

    The blow-down defect compares R^{-2} u(Rx) at coincident nodes against the
    homogeneous quadratic x'Ax/2 with A estimated at a corner of the monitored
    interior (or supplied explicitly); it vanishes for quadratic solutions.
    """
    if isinstance(u_or_solution, ExpanderSolution):
        u = u_or_solution.u
        residual_norm = u_or_solution.residual_norm
    else:
        u = u_or_solution
        residual_norm = residual_sup(u, region="interior")

    dom = u.domain
    H = hessian(u)
    cond_b = H.eigen_bounds("interior")
    if cond_b[0] <= 0.0:
        raise NonConvexityError("candidate is not strictly convex on the interior")

    if far_quadratic is None:
        k = dom.margin + 1
        far_quadratic = H.mats[(k,) * dom.n]
    A = np.atleast_2d(np.asarray(far_quadratic, dtype=np.float64))

    grids = dom.meshgrid()
    quad = np.zeros(dom.shape)
    for i in range(dom.n):
        for j in range(dom.n):
            quad += 0.5 * A[i, j] * grids[i] * grids[j]

    defect = 0.0
    for R in scales:
        try:
            src, dst = coincident_index_sets(dom, R)
        except EmptyCoincidenceError:
            continue
        defect = max(defect, float(np.max(np.abs(
            u.values[dst] / R ** 2 - quad[src]))))

    bern = bernstein_residual(u)
    w = _w_field(u)[dom.interior()]
    w_range = float(np.max(w) - np.min(w))
    return CertificationReport(condition_B=cond_b, condition_A_defect=defect,
                               bernstein_residual=bern, w_range=w_range,
                               is_quadratic=w_range <= 1e-8,
                               residual_norm=residual_norm)
