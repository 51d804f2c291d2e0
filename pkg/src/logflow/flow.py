"""Explicit time integration of the interpolation family of parabolic flows.

The right-hand side is F_tau(D2u) = (tau/n) ln det D2u + (1 - tau) trace D2u,
which is the heat equation at tau = 0 and the logarithmic gradient flow
du/dt = (1/n) ln det D2u at tau = 1.  The box is truncated, so the outermost
node layer is owned by a boundary model; everything inside evolves by the
discretised equation with forward Euler or explicit midpoint (RK2) stepping
under a parabolic CFL limit derived from the linearised operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import (AbortedNonConvex, BoundaryInconsistency, NonConvexityError)
from .grid import (BoxDomain, GridFunction, HessianField, gradient, hessian,
                   third_derivative_norm)

__all__ = [
    "QuadraticFarField",
    "ReferenceSolution",
    "Frozen",
    "FlowState",
    "MonitorRecord",
    "Trajectory",
    "rhs",
    "dt_stable",
    "step_explicit",
    "run",
    "pde_residual",
]


# ---------------------------------------------------------------------------
# boundary models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticFarField:
    """Far field u(x, t) = x'Ax/2 + b.x + c + t * rate(tau).

    A quadratic evolves exactly under every member of the flow family, with
    the x-independent rate (tau/n) ln det A + (1 - tau) tr A, so this is the
    exact closure whenever the data is quadratic outside a compact set.
    """

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("far-field matrix must be symmetric")

    def rate(self, tau: float, n: int) -> float:
        tr = float(np.trace(self.A))
        if tau == 0.0:
            return tr
        det = float(np.linalg.det(self.A))
        if det <= 0.0:
            raise NonConvexityError("quadratic far field needs det A > 0 when tau > 0")
        return tau / n * math.log(det) + (1.0 - tau) * tr

    def values_at(self, pts: np.ndarray, t: float, tau: float, n: int) -> np.ndarray:
        quad = 0.5 * np.einsum("ki,ij,kj->k", pts, self.A, pts)
        return quad + pts @ self.b + self.c + t * self.rate(tau, n)

    @classmethod
    def fit_corner(cls, u0: GridFunction) -> "QuadraticFarField":
        """Fit A, b, c from the Hessian/gradient/value at a corner interior node."""
        dom = u0.domain
        k = dom.margin + 1
        idx = (k,) * dom.n
        H = hessian(u0)
        A = H.mats[idx]
        g = gradient(u0)
        x0 = np.array([dom.axis[k]] * dom.n)
        Du = np.array([g[(i,) + idx] for i in range(dom.n)])
        b = Du - A @ x0
        c = float(u0.values[idx] - 0.5 * x0 @ A @ x0 - b @ x0)
        return cls(A=A, b=b, c=c)


@dataclass(frozen=True)
class ReferenceSolution:
    """Closed-form reference u_ref(points, t) used as exact Dirichlet data."""

    fn: Callable[[np.ndarray, float], np.ndarray]

    def values_at(self, pts: np.ndarray, t: float, tau: float, n: int) -> np.ndarray:
        return np.asarray(self.fn(pts, t), dtype=np.float64)


@dataclass(frozen=True)
class Frozen:
    """Boundary ring stays at its initial values."""


BoundaryModel = QuadraticFarField | ReferenceSolution | Frozen


@lru_cache(maxsize=32)
def _ring_info(domain: BoxDomain):
    mask = domain.ring_mask()
    idx = np.nonzero(mask)
    pts = np.stack([domain.axis[i] for i in idx], axis=-1)
    return idx, pts


def apply_boundary(values: np.ndarray, domain: BoxDomain, model: BoundaryModel,
                   t: float, tau: float, u0_ring: np.ndarray | None = None) -> None:
    idx, pts = _ring_info(domain)
    if isinstance(model, Frozen):
        if u0_ring is None:
            return
        values[idx] = u0_ring
    else:
        values[idx] = model.values_at(pts, t, tau, domain.n)


def boundary_rate(domain: BoxDomain, model: BoundaryModel, t: float, tau: float) -> np.ndarray:
    """Time derivative of the ring values (finite difference for references)."""
    idx, pts = _ring_info(domain)
    if isinstance(model, Frozen):
        return np.zeros(pts.shape[0])
    if isinstance(model, QuadraticFarField):
        return np.full(pts.shape[0], model.rate(tau, domain.n))
    eps = 1e-6 * max(1.0, abs(t))
    return (model.values_at(pts, t + eps, tau, domain.n)
            - model.values_at(pts, max(t - eps, 0.0), tau, domain.n)) / (eps + min(eps, t))


# ---------------------------------------------------------------------------
# flow state and monitors
# ---------------------------------------------------------------------------

@dataclass
class MonitorRecord:
    t: float
    lambda_min: float
    lambda_max: float
    grad_sq_window: float
    d3_norm: float
    dt: float
    residual: float

    COLUMNS = ("t", "lambda_min", "lambda_max", "grad_sq_window",
               "d3_norm", "dt", "residual")

    def as_row(self) -> tuple:
        return (self.t, self.lambda_min, self.lambda_max, self.grad_sq_window,
                self.d3_norm, self.dt, self.residual)


@dataclass
class FlowState:
    u: GridFunction
    t: float
    tau: float
    boundary: BoundaryModel
    step_count: int = 0
    monitor_log: list = field(default_factory=list)


@dataclass
class Trajectory:
    """Snapshots plus the final state of one integration."""

    state: FlowState
    snapshots: list  # list of (t, GridFunction)

    @property
    def monitors(self) -> list:
        return self.state.monitor_log

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def u_at(self, t: float) -> GridFunction:
        for tk, u in self.snapshots:
            if abs(tk - t) <= 1e-9 * max(1.0, abs(t)):
                return u
        raise KeyError(f"no snapshot at t={t}")


# ---------------------------------------------------------------------------
# spatial operator
# ---------------------------------------------------------------------------

def _ftau(u: GridFunction, tau: float, H: HessianField | None = None) -> np.ndarray:
    """F_tau(D2u) on every node where the Hessian is defined; convexity is
    enforced on the non-ring nodes whenever tau > 0."""
    if H is None:
        H = hessian(u)
    n = u.domain.n
    trace = np.einsum("...ii->...", H.mats)
    if tau == 0.0:
        return trace
    if not H.is_strictly_convex("nonring"):
        raise NonConvexityError("strict convexity lost while evaluating the flow operator")
    det = H.det()
    det = np.where(det > 0.0, det, 1.0)  # ring one-sided values may misbehave; unused
    return tau / n * np.log(det) + (1.0 - tau) * trace


def rhs(u: GridFunction, tau: float, boundary: BoundaryModel | None = None,
        t: float = 0.0) -> GridFunction:
    """Nodewise right-hand side; ring entries come from the boundary model's rate."""
    vals = _ftau(u, tau)
    if boundary is not None:
        idx, _ = _ring_info(u.domain)
        vals[idx] = boundary_rate(u.domain, boundary, t, tau)
    return u.with_values(vals, label=f"rhs[{u.label}]")


def dt_stable(state: FlowState, safety: float = 0.5) -> float:
    """Parabolic step limit safety * h^2 / (2 n mu_max).

    mu_max bounds the largest diffusion coefficient of the linearised operator
    (tau/n) u^{ij} d_ij + (1 - tau) Laplacian over the non-ring nodes.
    """
    dom = state.u.domain
    mu = 1.0 - state.tau
    if state.tau > 0.0:
        H = hessian(state.u)
        lmin, _ = H.eigen_bounds("nonring")
        if lmin <= 0.0:
            raise NonConvexityError("lambda_min <= 0: no stable explicit step exists")
        mu += state.tau / (dom.n * lmin)
    return safety * dom.h ** 2 / (2.0 * dom.n * mu)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _advance(state: FlowState, dt: float, stepper: str,
             k1: np.ndarray | None = None) -> np.ndarray:
    """One tentative update of the nodal values (may raise NonConvexityError)."""
    u, tau, t = state.u, state.tau, state.t
    dom = u.domain
    if k1 is None:
        k1 = _ftau(u, tau)
    if stepper == "euler":
        new = u.values + dt * k1
    elif stepper == "rk2":
        mid = u.values + 0.5 * dt * k1
        apply_boundary(mid, dom, state.boundary, t + 0.5 * dt, tau,
                       u0_ring=u.values[_ring_info(dom)[0]])
        k2 = _ftau(u.with_values(mid), tau)
        new = u.values + dt * k2
    else:
        raise ValueError(f"unknown stepper {stepper!r}")
    apply_boundary(new, dom, state.boundary, t + dt, tau,
                   u0_ring=u.values[_ring_info(dom)[0]])
    # the new state must itself be convex when tau > 0, else reject the step
    if tau > 0.0 and not hessian(u.with_values(new)).is_strictly_convex("nonring"):
        raise NonConvexityError("step produced a non-convex iterate")
    return new


def step_explicit(state: FlowState, dt: float, stepper: str = "rk2",
                  max_halvings: int = 20, _k1: np.ndarray | None = None) -> FlowState:
    """Advance one accepted step; on convexity failure halve dt and retry."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    trial_dt = dt
    for _ in range(max_halvings + 1):
        try:
            new_vals = _advance(state, trial_dt, stepper, k1=_k1)
        except NonConvexityError:
            trial_dt *= 0.5
            continue
        new_u = state.u.with_values(new_vals)
        return FlowState(u=new_u, t=state.t + trial_dt, tau=state.tau,
                         boundary=state.boundary, step_count=state.step_count + 1,
                         monitor_log=state.monitor_log)
    raise AbortedNonConvex(
        f"step rejected after {max_halvings} halvings at t={state.t:.6g}", state=state)


def _monitor(state: FlowState, dt: float, residual: float,
             window: tuple, H: HessianField | None = None) -> MonitorRecord:
    u = state.u
    if H is None:
        H = hessian(u)
    lmin, lmax = H.eigen_bounds("interior")
    g = gradient(u)
    gsq = float(np.max(np.sum(g * g, axis=0)[window]))
    d3 = third_derivative_norm(u, H)
    return MonitorRecord(t=state.t, lambda_min=lmin, lambda_max=lmax,
                         grad_sq_window=gsq, d3_norm=d3, dt=dt, residual=residual)


def run(u0: GridFunction, tau: float, t_end: float,
        boundary: BoundaryModel | None = None, *,
        stepper: str = "rk2", safety: float = 0.5, max_dt: float | None = None,
        snapshot_times: Sequence[float] = (), store_every: int = 0,
        monitor_every: int = 1, monitor_window: float | None = None,
        max_halvings: int = 20) -> Trajectory:
    """Integrate to t_end with adaptive steps, exact snapshot landings and monitors.

    The initial data is checked for strict convexity on the grid when tau > 0
    (a warning, not an error: the continuum statement guarantees preservation,
    the discrete run enforces it step by step).  Reference boundaries must
    match the initial data within 10 percent or the run refuses to start.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    dom = u0.domain
    if boundary is None:
        boundary = QuadraticFarField.fit_corner(u0)
    if isinstance(boundary, ReferenceSolution):
        ref0 = boundary.values_at(dom.points(), 0.0, tau, dom.n).reshape(dom.shape)
        scale = max(1.0, float(np.max(np.abs(ref0))))
        gap = float(np.max(np.abs(ref0 - u0.values)))
        if gap > 0.1 * scale:
            raise BoundaryInconsistency(
                f"reference disagrees with initial data by {gap:.3g} (>10%)")
    if tau > 0.0:
        lmin0, _ = hessian(u0).eigen_bounds("nonring")
        if lmin0 <= 1e-10:
            warnings.warn("initial data is not strictly convex on the grid "
                          f"(lambda_min = {lmin0:.3g})", stacklevel=2)

    window = dom.window(monitor_window) if monitor_window is not None else dom.interior()
    targets = sorted({float(s) for s in snapshot_times if 0.0 <= s <= t_end + 1e-12})

    state = FlowState(u=u0.copy(), t=0.0, tau=tau, boundary=boundary)
    snapshots: list = []

    def _maybe_snapshot():
        if (targets and abs(state.t - targets[0]) <= 1e-9 * max(1.0, targets[0])):
            targets.pop(0)
            snapshots.append((state.t, state.u.copy()))
        elif store_every and state.step_count % store_every == 0:
            snapshots.append((state.t, state.u.copy()))

    k1 = _ftau(state.u, tau)
    state.monitor_log.append(_monitor(state, 0.0, 0.0, window))
    _maybe_snapshot()

    while state.t < t_end - 1e-12:
        dt = dt_stable(state, safety)
        if max_dt is not None:
            dt = min(dt, max_dt)
        if targets:
            dt = min(dt, targets[0] - state.t)
        dt = min(dt, t_end - state.t)
        new_state = step_explicit(state, dt, stepper=stepper,
                                  max_halvings=max_halvings, _k1=k1)
        taken = new_state.t - state.t
        k1_new = _ftau(new_state.u, tau)
        resid = float(np.max(np.abs(
            ((new_state.u.values - state.u.values) / taken - 0.5 * (k1 + k1_new))
            [dom.interior()])))
        state, k1 = new_state, k1_new
        # snap exactly onto targets to keep reference comparisons clean
        if targets and abs(state.t - targets[0]) <= 1e-9 * max(1.0, targets[0]):
            state.t = targets[0]
        if monitor_every and state.step_count % monitor_every == 0:
            state.monitor_log.append(_monitor(state, taken, resid, window))
        _maybe_snapshot()

    if not snapshots or snapshots[-1][0] < state.t - 1e-12:
        snapshots.append((state.t, state.u.copy()))
    return Trajectory(state=state, snapshots=snapshots)


# ---------------------------------------------------------------------------
# a-posteriori residual
# ---------------------------------------------------------------------------

def pde_residual(u_lo: GridFunction, u_mid: GridFunction, u_hi: GridFunction,
                 dt: float, tau: float) -> float:
    """Interior sup of (u(t+dt) - u(t))/dt - F_tau(D2 u(t+dt/2)).

    The centred difference makes the time-discretisation error O(dt^2), so
    with a small probe step the value measures the spatial consistency of the
    trajectory with the flow equation.
    """
    dom = u_lo.domain
    f_mid = _ftau(u_mid, tau)
    resid = (u_hi.values - u_lo.values) / dt - f_mid
    return float(np.max(np.abs(resid[dom.interior()])))


def trajectory_pde_residual(traj: Trajectory, tau: float) -> float:
    """Largest centred-triple residual over equally spaced snapshot triples."""
    snaps = traj.snapshots
    worst = 0.0
    found = False
    for k in range(1, len(snaps) - 1):
        t0, u0 = snaps[k - 1]
        t1, u1 = snaps[k]
        t2, u2 = snaps[k + 1]
        if abs((t1 - t0) - (t2 - t1)) > 1e-9 * max(t2 - t0, 1e-30):
            continue
        found = True
        worst = max(worst, pde_residual(u0, u1, u2, t2 - t0, tau))
    if not found:
        raise ValueError("no equally spaced snapshot triple available")
    return worst
