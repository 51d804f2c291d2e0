"""Convex conjugation: closed forms, involution, duality of the flow."""

import numpy as np
import pytest

from logflow.errors import RangeError
from logflow.grid import BoxDomain, GridFunction
from logflow.legendre import (dual_flow_check,
                              duality_involution_check, eigenvalue_swap_gap,
                              legendre_transform, young_gap)


def quad(domain, A, c=0.0, label="quad"):
    A = np.atleast_2d(A)
    grids = domain.meshgrid()
    vals = c * np.ones(domain.shape)
    for i in range(domain.n):
        for j in range(domain.n):
            vals += 0.5 * A[i, j] * grids[i] * grids[j]
    return GridFunction(domain, vals, label=label)


def test_isotropic_quadratic_is_self_dual():
    dom = BoxDomain(n=2, half_width=1.5, m=33)
    u = quad(dom, np.eye(2))
    star = legendre_transform(u)
    grids = star.domain.meshgrid()
    exact = 0.5 * sum(g ** 2 for g in grids)
    assert np.max(np.abs(star.values - exact)) < 1e-12


def test_quadratic_conjugate_inverts_the_matrix():
    dom = BoxDomain(n=2, half_width=1.5, m=33)
    A = np.diag([2.0, 0.5])
    star = legendre_transform(quad(dom, A))
    grids = star.domain.meshgrid()
    Ainv = np.diag([0.5, 2.0])
    exact = np.zeros(star.domain.shape)
    for i in range(2):
        for j in range(2):
            exact += 0.5 * Ainv[i, j] * grids[i] * grids[j]
    assert np.max(np.abs(star.values - exact)) < 1e-12


def test_quartic_conjugate_closed_form():
    # conjugate of x^4/4 is (3/4) |y|^{4/3}
    dom = BoxDomain(n=1, half_width=1.2, m=257)
    x = dom.axis
    u = GridFunction(dom, 0.25 * x ** 4 + 0.5e-3 * x ** 2)  # tiny stiffener keeps it strictly convex
    ydom = BoxDomain(n=1, half_width=0.8, m=65)
    star = legendre_transform(u, ydom)
    y = ydom.axis
    exact = 0.75 * np.abs(y) ** (4.0 / 3.0)
    assert np.max(np.abs(star.values - exact)) < 5e-3


def test_out_of_range_dual_point_raises():
    dom = BoxDomain(n=1, half_width=1.0, m=33)
    u = quad(dom, np.eye(1))  # gradient range is [-1, 1]
    with pytest.raises(RangeError):
        legendre_transform(u, BoxDomain(n=1, half_width=3.0, m=17))


def test_involution_returns_original():
    dom = BoxDomain(n=1, half_width=2.0, m=129)
    x = dom.axis
    u = GridFunction(dom, 0.5 * x ** 2 + 0.05 * np.exp(-x ** 2))
    star = legendre_transform(u)
    back = legendre_transform(star)
    pts = back.domain.points()
    from logflow.grid import sample
    u_at = sample(u, pts, order=3)
    assert np.max(np.abs(back.values.ravel() - u_at)) < 5e-4


def test_duality_involution_identity_matrix():
    dom = BoxDomain(n=1, half_width=2.0, m=65)
    u = quad(dom, np.eye(1))
    assert duality_involution_check(u) < 1e-10


def test_duality_involution_quadratic():
    dom = BoxDomain(n=2, half_width=1.5, m=33)
    assert duality_involution_check(quad(dom, np.diag([2.0, 0.5]))) < 1e-8


def test_duality_involution_bump():
    dom = BoxDomain(n=1, half_width=3.0, m=129)
    x = dom.axis
    u = GridFunction(dom, 0.5 * x ** 2 + 0.05 * np.exp(-x ** 2))
    assert duality_involution_check(u) < 5e-3


def test_young_inequality_holds_exactly_for_sampled_pairs():
    dom = BoxDomain(n=1, half_width=2.5, m=65)
    x = dom.axis
    u = GridFunction(dom, 0.5 * x ** 2 + 0.1 * np.exp(-x ** 2))
    star = legendre_transform(u)
    worst_min, eq_defect = young_gap(u, star)
    assert worst_min >= -1e-12      # u(x) + u*(y) >= <x, y>
    assert eq_defect < 5e-3         # equality at y = Du(x)


def test_eigenvalue_swap():
    dom = BoxDomain(n=2, half_width=1.5, m=33)
    u = quad(dom, np.diag([2.0, 0.5]))
    gap_lo, gap_hi = eigenvalue_swap_gap(u)
    assert gap_lo <= dom.h
    assert gap_hi <= dom.h


def test_dual_flow_check_quadratic_trajectory():
    # closed-form trajectory: u = x'Ax/2 + t ln det(A)/n, conjugate solves the
    # same equation, residual at machine precision
    dom = BoxDomain(n=2, half_width=2.0, m=33)
    A = np.diag([2.0, 2.0])
    rate = 0.5 * np.log(4.0)
    snaps = [(t, quad(dom, A, c=rate * t)) for t in (0.45, 0.5, 0.55)]
    assert dual_flow_check(snaps) < 1e-8


def test_dual_flow_check_handles_uneven_spacing():
    # geometric snapshot schedules are the common case; the three-point
    # derivative stays exact on trajectories linear in t
    dom = BoxDomain(n=2, half_width=2.0, m=33)
    A = np.diag([2.0, 2.0])
    rate = 0.5 * np.log(4.0)
    snaps = [(t, quad(dom, A, c=rate * t)) for t in (0.25, 0.5, 1.0)]
    assert dual_flow_check(snaps) < 1e-8


def test_dual_flow_check_requires_increasing_times():
    dom = BoxDomain(n=1, half_width=1.0, m=17)
    snaps = [(t, quad(dom, np.eye(1))) for t in (0.4, 0.2, 0.1)]
    with pytest.raises(ValueError):
        dual_flow_check(snaps)


def test_dual_flow_check_bump_trajectory_converges():
    from logflow.flow import QuadraticFarField, run

    def residual(m, delta):
        # probe spacing refined with the grid, like the CFL-coupled time step
        dom = BoxDomain(n=1, half_width=4.0, m=m)
        x = dom.axis
        u0 = GridFunction(dom, 0.5 * x ** 2 + 0.1 * np.exp(-x ** 2))
        traj = run(u0, tau=1.0, t_end=0.5 + delta,
                   boundary=QuadraticFarField(np.eye(1), np.zeros(1)),
                   snapshot_times=[0.5 - delta, 0.5, 0.5 + delta])
        return dual_flow_check([(t, u) for t, u in traj.snapshots])

    r65 = residual(65, 0.005)
    assert r65 < 1e-2
    assert r65 / residual(129, 0.0025) > 3.0
