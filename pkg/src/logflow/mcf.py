"""Spacelike gradient graphs in the flat split-signature space R^{2n}.

A strictly convex potential u embeds R^n as the graph F(x) = (x, Du(x)) in
null coordinates (x, y), where the ambient metric is the pairing

    <a, b> = ( a_x . b_y + a_y . b_x ) / 2 ,

so ds^2 = sum dx^i dy^i / 2.  Tangent frames e_i = d/dx^i + u_ij d/dy^j and
normal frames eta_i = d/dx^i - u_ij d/dy^j satisfy <e_i, e_j> = u_ij,
<eta_i, eta_j> = -u_ij and <e_i, eta_j> = 0; the induced metric is the
Hessian itself.   With g = det D2u, the mean curvature vector is

    H = -(1/(2 n g)) (dg/dx^l) g^{lk} eta_k ,

whose x-part is the velocity field of the diffeomorphisms that turn a
potential trajectory into a solution of dF/dt = H.

A diagonal-signature presentation is available as an output conversion:
p = (x + y) / 2, q = (x - y) / 2 turns the pairing into
sum (dp^i)^2 - sum (dq^i)^2.  This basis choice is a fixed convention of the
package, not a canonical one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EscapeError, NonConvexityError
from .grid import (BoxDomain, GridFunction, HessianField, gradient, hessian,
                   sample)

__all__ = [
    "null_pairing_matrix",
    "ImmersionFrame",
    "immersion_frame",
    "mean_curvature",
    "mean_curvature_fields",
    "velocity_fields",
    "ParticlePath",
    "integrate_particles",
    "verify_mcf",
    "McfReport",
    "to_signature_coordinates",
]


def null_pairing_matrix(n: int) -> np.ndarray:
    """Gram matrix of the ambient pairing in null coordinates (x, y)."""
    B = np.zeros((2 * n, 2 * n))
    B[:n, n:] = 0.5 * np.eye(n)
    B[n:, :n] = 0.5 * np.eye(n)
    return B


def to_signature_coordinates(vec: np.ndarray) -> np.ndarray:
    """Convert null components (x, y) to the diagonal-signature basis (p, q)."""
    vec = np.asarray(vec, dtype=np.float64)
    n = vec.shape[-1] // 2
    x, y = vec[..., :n], vec[..., n:]
    return np.concatenate([(x + y) * 0.5, (x - y) * 0.5], axis=-1)


@dataclass
class ImmersionFrame:
    """Embedding data of one grid node: frames, metric and curvature vector."""

    x: np.ndarray           # base point, (n,)
    F: np.ndarray           # embedding (x, Du), (2n,)
    tangent: np.ndarray     # e_i rows, (n, 2n)
    normal: np.ndarray      # eta_i rows, (n, 2n)
    metric: np.ndarray      # induced metric = Hessian, (n, n)
    gdet: float             # det D2u
    H: np.ndarray           # mean curvature vector, (2n,)


def _det_fields(u: GridFunction, H: HessianField):
    g = H.det()
    if np.any(g[u.domain.nonring()] <= 0.0):
        raise NonConvexityError("graph is not spacelike: det D2u <= 0")
    return g


def mean_curvature_fields(u: GridFunction) -> np.ndarray:
    """Mean curvature components on the whole grid, shape (2n, *grid).

    x-part: H_x^i = -(1/(2 n g)) (d_l g) g^{li};  y-part: H_y^j = (d_j g)/(2 n g).
    """
    from .grid import axis_diff
    dom = u.domain
    n, h = dom.n, dom.h
    Hess = hessian(u)
    g = _det_fields(u, Hess)
    inv = Hess.inverse()
    dg = np.stack([axis_diff(g, h, ax) for ax in range(n)])
    out = np.empty((2 * n,) + dom.shape)
    coef = 1.0 / (2.0 * n * g)
    for i in range(n):
        out[i] = -coef * sum(dg[l] * inv[..., l, i] for l in range(n))
        out[n + i] = coef * dg[i]
    return out


def velocity_fields(u: GridFunction) -> np.ndarray:
    """The particle velocity dx/dt = -(1/(2 n g)) (d_l g) g^{li}, shape (n, *grid)."""
    return mean_curvature_fields(u)[: u.domain.n]


def immersion_frame(u: GridFunction, at: tuple) -> ImmersionFrame:
    """Assemble the frame at one (interior) node index."""
    dom = u.domain
    n = dom.n
    k = dom.margin + 1
    if any(i < k or i >= dom.m - k for i in at):
        raise ValueError("frame node must lie in the monitored interior")
    Hess = hessian(u)
    g = _det_fields(u, Hess)
    grad = gradient(u)
    x = np.array([dom.axis[i] for i in at])
    Du = np.array([grad[(i,) + tuple(at)] for i in range(n)])
    mat = Hess.mats[tuple(at)]
    tangent = np.concatenate([np.eye(n), mat], axis=1)
    normal = np.concatenate([np.eye(n), -mat], axis=1)
    Hvec = mean_curvature_fields(u)[(slice(None),) + tuple(at)]
    return ImmersionFrame(x=x, F=np.concatenate([x, Du]), tangent=tangent,
                          normal=normal, metric=mat, gdet=float(g[tuple(at)]),
                          H=Hvec)


def mean_curvature(u: GridFunction, at: tuple) -> np.ndarray:
    """Mean curvature vector at one node, in null components (2n,)."""
    return immersion_frame(u, at).H


# ---------------------------------------------------------------------------
# particle transport along a trajectory
# ---------------------------------------------------------------------------

@dataclass
class ParticlePath:
    x0: np.ndarray
    times: np.ndarray        # (k,)
    positions: np.ndarray    # (k, n)
    F: np.ndarray            # (k, 2n) embedding along the path

    def __post_init__(self):
        if not np.allclose(self.positions[0], self.x0):
            raise ValueError("path must start at its seed")


def _escape_guard(dom: BoxDomain, pts: np.ndarray):
    limit = dom.half_width - (dom.margin + 1) * dom.h
    if np.any(np.abs(pts) > limit):
        raise EscapeError("particle left the trustworthy interior margin")


def integrate_particles(trajectory, seeds, t_start: float | None = None,
                        t_end: float | None = None) -> list[ParticlePath]:
    """Advect seeds through the time-dependent velocity field of a trajectory.

    The velocity field is precomputed on the grid at every stored snapshot;
    particles take one explicit midpoint step per snapshot interval with
    multilinear spatial sampling and linear-in-time field interpolation.  The
    embedding F = (r, Du(r)) along each path uses cubic sampling so that time
    differences of F stay within the second-order error budget.
    """
    snaps = trajectory.snapshots
    times = np.array([t for t, _ in snaps])
    lo = 0 if t_start is None else int(np.searchsorted(times, t_start - 1e-12))
    hi = len(snaps) - 1 if t_end is None else int(
        np.searchsorted(times, t_end + 1e-12) - 1)
    if hi - lo < 2:
        raise ValueError("need at least three stored snapshots in the window")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    dom = snaps[0][1].domain
    _escape_guard(dom, seeds)

    vel = [velocity_fields(snaps[k][1]) for k in range(lo, hi + 1)]
    grads = [gradient(snaps[k][1]) for k in range(lo, hi + 1)]
    tt = times[lo:hi + 1]

    k_steps = len(tt) - 1
    npart = seeds.shape[0]
    pos = np.empty((k_steps + 1, npart, dom.n))
    pos[0] = seeds
    for k in range(k_steps):
        dt = tt[k + 1] - tt[k]
        x = pos[k]
        v1 = np.stack([sample(vel[k][i], dom, x, order=1)
                       for i in range(dom.n)], axis=-1)
        xm = x + 0.5 * dt * v1
        _escape_guard(dom, xm)
        vm = np.stack([sample(0.5 * (vel[k][i] + vel[k + 1][i]), dom, xm, order=1)
                       for i in range(dom.n)], axis=-1)
        pos[k + 1] = x + dt * vm
        _escape_guard(dom, pos[k + 1])

    F = np.empty((k_steps + 1, npart, 2 * dom.n))
    for k in range(k_steps + 1):
        F[k, :, :dom.n] = pos[k]
        for i in range(dom.n):
            F[k, :, dom.n + i] = sample(grads[k][i], dom, pos[k], order=3)
    return [ParticlePath(x0=seeds[p], times=tt.copy(),
                         positions=pos[:, p].copy(), F=F[:, p].copy())
            for p in range(npart)]


# ---------------------------------------------------------------------------
# verification of dF/dt = H
# ---------------------------------------------------------------------------

@dataclass
class McfReport:
    max_deviation: float          # sup |dF/dt - H| in ambient components
    max_tangential: float         # sup |tangential part of dF/dt|
    max_normal: float             # sup |normal part of dF/dt|
    per_path: list = field(default_factory=list)

    @property
    def tangential_ratio(self) -> float:
        return self.max_tangential / max(self.max_normal, 1e-300)


def verify_mcf(paths: list, trajectory) -> McfReport:
    """Compare centred time differences of F against the curvature vector.

    The motion is purely normal in the continuum, so the tangential part of
    dF/dt (split through the frames at the sampled point) must vanish to
    discretisation accuracy while the full vector matches H.  Paths produced
    by :func:`integrate_particles` share their time grid, which lets the field
    sampling be batched per snapshot.
    """
    snaps = trajectory.snapshots
    times = np.array([t for t, _ in snaps])
    dom = snaps[0][1].domain
    n = dom.n

    tt = paths[0].times
    for p in paths[1:]:
        if not np.array_equal(p.times, tt):
            raise ValueError("paths must share one time grid")
    k0 = int(np.searchsorted(times, tt[0] - 1e-12))

    npart = len(paths)
    dev = np.zeros(npart)
    tan = np.zeros(npart)
    nor = np.zeros(npart)
    for j in range(1, len(tt) - 1):
        u_k = snaps[k0 + j][1]
        Hf = mean_curvature_fields(u_k)
        Hm = hessian(u_k).mats
        pts = np.stack([p.positions[j] for p in paths])      # (npart, n)
        dFdt = np.stack([(p.F[j + 1] - p.F[j - 1]) / (tt[j + 1] - tt[j - 1])
                         for p in paths])                     # (npart, 2n)
        Hvec = np.stack([sample(Hf[c], dom, pts, order=3)
                         for c in range(2 * n)], axis=-1)     # (npart, 2n)
        U = np.empty((npart, n, n))
        for a_ in range(n):
            for b_ in range(n):
                U[:, a_, b_] = sample(Hm[..., a_, b_], dom, pts, order=3)
        dev = np.maximum(dev, np.max(np.abs(dFdt - Hvec), axis=1))
        # split dFdt = sum a_i e_i + sum b_i eta_i through the point frames
        dx, dy = dFdt[:, :n], dFdt[:, n:]
        Uinv_dy = np.linalg.solve(U, dy[..., None])[..., 0]
        a = 0.5 * (dx + Uinv_dy)
        b = 0.5 * (dx - Uinv_dy)
        Ua = np.einsum("kij,kj->ki", U, a)
        Ub = np.einsum("kij,kj->ki", U, b)
        tan = np.maximum(tan, np.max(np.abs(np.concatenate([a, Ua], axis=1)),
                                     axis=1))
        nor = np.maximum(nor, np.max(np.abs(np.concatenate([b, -Ub], axis=1)),
                                     axis=1))
    per_path = [{"x0": p.x0.tolist(), "deviation": float(dev[i]),
                 "tangential": float(tan[i]), "normal": float(nor[i])}
                for i, p in enumerate(paths)]
    return McfReport(max_deviation=float(np.max(dev)),
                     max_tangential=float(np.max(tan)),
                     max_normal=float(np.max(nor)), per_path=per_path)
