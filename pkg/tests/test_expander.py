"""Self-expander equation: shooting vs Newton vs closed forms, certification."""

import numpy as np
import pytest

from logflow.errors import (BlowupError, NewtonStall, NonConvexityError,
                            SingularStartError)
from logflow.expander import (bernstein_residual, certify,
                              expander_residual, newton_solve, profile_to_grid,
                              radial_shoot, residual_sup)
from logflow.flow import run
from logflow.grid import BoxDomain, GridFunction


def iso_quad(domain, scale=1.0, const=0.0):
    grids = domain.meshgrid()
    r2 = sum(g ** 2 for g in grids)
    return GridFunction(domain, const + 0.5 * scale * r2, label="quad")


# ---------------------------------------------------------------------------
# pointwise residual
# ---------------------------------------------------------------------------

def test_residual_zero_on_isotropic_quadratic():
    for n in (1, 2):
        dom = BoxDomain(n=n, half_width=1.5, m=17)
        assert residual_sup(iso_quad(dom)) < 1e-11


def test_residual_of_anisotropic_quadratic():
    # det = 4 but the exponent vanishes for any quadratic: residual = 3 everywhere
    dom = BoxDomain(n=2, half_width=1.0, m=17)
    x1, x2 = dom.meshgrid()
    u = GridFunction(dom, 0.5 * (2 * x1 ** 2 + 2 * x2 ** 2))
    r = expander_residual(u)
    mid = (dom.m // 2, dom.m // 2)
    assert r.values[mid] == pytest.approx(3.0, abs=1e-9)


def test_residual_of_stretched_parabola_1d():
    dom = BoxDomain(n=1, half_width=1.0, m=17)
    u = GridFunction(dom, 0.6 * dom.axis ** 2)
    r = expander_residual(u)
    assert r.values[dom.m // 2] == pytest.approx(0.2, abs=1e-9)


def test_residual_requires_convexity():
    dom = BoxDomain(n=1, half_width=1.0, m=17)
    with pytest.raises(NonConvexityError):
        expander_residual(GridFunction(dom, -0.5 * dom.axis ** 2))


# ---------------------------------------------------------------------------
# radial shooting
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_trivial_profile_is_half_r_squared(n):
    prof = radial_shoot(n=n, a=0.0, r_max=2.0)
    assert np.max(np.abs(prof.u - 0.5 * prof.r ** 2)) < 1e-7
    assert np.max(np.abs(prof.du - prof.r)) < 1e-7


def test_shooting_matches_fixed_step_rk4_oracle():
    # independent fixed-step RK4 at ten-fold resolution
    n, a, r_max = 1, -0.1, 1.5
    prof = radial_shoot(n=n, a=a, r_max=r_max)

    r0 = 1e-4
    c0 = np.exp(a)
    y = np.array([a + 0.5 * c0 * r0 ** 2, c0 * r0])

    def f(r, y):
        u, du = y
        return np.array([du, np.exp(u - 0.5 * r * du)])

    steps = 50_000
    hstep = (r_max - r0) / steps
    r = r0
    for _ in range(steps):
        k1 = f(r, y)
        k2 = f(r + hstep / 2, y + hstep / 2 * k1)
        k3 = f(r + hstep / 2, y + hstep / 2 * k2)
        k4 = f(r + hstep, y + hstep * k3)
        y = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r += hstep
    idx = np.argmin(np.abs(prof.r - r_max))
    assert abs(prof.u[idx] - y[0]) < 1e-8


def test_line_profiles_are_exact_parabolas():
    # on the line, u(0)=a, u'(0)=0 forces u = a + e^a r^2 / 2 identically
    a = -0.1
    prof = radial_shoot(n=1, a=a, r_max=2.0)
    exact = a + 0.5 * np.exp(a) * prof.r ** 2
    assert np.max(np.abs(prof.u - exact)) < 1e-8


def test_shoot_rejects_slope_for_higher_dimensions():
    with pytest.raises(SingularStartError):
        radial_shoot(n=2, a=0.0, r_max=1.0, slope0=0.5)


def test_shoot_blowup_guard():
    with pytest.raises(BlowupError):
        radial_shoot(n=1, a=20.0, r_max=1.0)


def test_off_centre_line_profile_is_not_quadratic():
    # a nonzero starting slope genuinely breaks the quadratic rigidity
    prof = radial_shoot(n=1, a=0.0, r_max=2.0, slope0=0.5)
    w = prof.u - 0.5 * prof.r * prof.du
    assert np.max(w) - np.min(w) > 1e-3


# ---------------------------------------------------------------------------
# grid Newton solver
# ---------------------------------------------------------------------------

def test_newton_recovers_quadratic_from_noisy_start(rng):
    dom = BoxDomain(n=2, half_width=1.5, m=21)
    exact = iso_quad(dom)
    noisy = exact.values + 1e-3 * rng.standard_normal(dom.shape)
    noisy[dom.ring_mask()] = exact.values[dom.ring_mask()]
    sol = newton_solve(GridFunction(dom, noisy), dirichlet=exact)
    assert sol.residual_norm <= 1e-10
    assert sol.iterations <= 6
    assert np.max(np.abs(sol.u.values - exact.values)) < 1e-9


def test_newton_cross_validates_radial_profile():
    n, a = 1, -0.1
    prof = radial_shoot(n=n, a=a, r_max=2.0)
    dom = BoxDomain(n=1, half_width=1.5, m=65)
    target = profile_to_grid(prof, dom)
    # start from the interpolated profile with a smooth interior perturbation
    start_vals = target.values + 5e-3 * np.cos(2.0 * dom.axis)
    start_vals[dom.ring_mask()] = target.values[dom.ring_mask()]
    sol = newton_solve(GridFunction(dom, start_vals), dirichlet=target)
    assert sol.residual_norm <= 1e-10
    gap = np.max(np.abs(sol.u.values - target.values))
    assert gap < 1e-4


def test_newton_stalls_on_inconsistent_boundary():
    dom = BoxDomain(n=1, half_width=1.5, m=33)
    start = iso_quad(dom)
    bad = GridFunction(dom, -0.5 * dom.axis ** 2)  # concave ring data
    with pytest.raises((NewtonStall, NonConvexityError)):
        newton_solve(start, dirichlet=bad)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def test_certify_trivial_expander():
    dom = BoxDomain(n=2, half_width=2.0, m=33)
    rep = certify(iso_quad(dom))
    assert rep.condition_A_defect < 1e-10
    assert rep.bernstein_residual < 1e-9
    assert rep.w_range < 1e-10
    assert rep.is_quadratic


def test_certify_reports_constant_offset_defect():
    # u = a + e^a r^2/2 solves the equation but breaks degree-2 homogeneity by a
    a = -0.1
    prof = radial_shoot(n=1, a=a, r_max=3.0)
    dom = BoxDomain(n=1, half_width=2.0, m=65)
    rep = certify(profile_to_grid(prof, dom))
    assert rep.residual_norm < 1e-6
    assert rep.is_quadratic  # w is the constant a
    # R^-2 u(Rx) - x'Ax/2 = a / R^2, largest at the smallest scale R = 2
    assert rep.condition_A_defect == pytest.approx(abs(a) / 4.0, rel=1e-3)


def test_certify_refuses_non_solutions():
    dom = BoxDomain(n=2, half_width=1.0, m=17)
    x1, x2 = dom.meshgrid()
    u = GridFunction(dom, 0.5 * (2 * x1 ** 2 + 2 * x2 ** 2))
    rep = certify(u)
    assert rep.residual_norm > 1.0  # certification reports the failure loudly


def test_flow_snapshot_of_homogeneous_data_is_an_expander():
    # two-slope degree-2 homogeneous data: u(x, 1) of the flow solves the
    # stationary equation; a non-quadratic instance with non-constant w
    from logflow.flow import ReferenceSolution
    dom = BoxDomain(n=1, half_width=6.0, m=129)
    x = dom.axis
    cm, cp = 0.7, 1.3
    c = np.where(x < 0, cm, cp)
    u0 = GridFunction(dom, 0.5 * c * x ** 2, label="two-slope")
    ref = ReferenceSolution(
        lambda pts, t: 0.5 * np.where(pts[:, 0] < 0, cm, cp) * pts[:, 0] ** 2
        + t * np.log(np.where(pts[:, 0] < 0, cm, cp)))
    traj = run(u0, tau=1.0, t_end=1.0, boundary=ref)
    u1 = traj.state.u
    assert residual_sup(u1, region="interior") < 0.05  # O(h^2) residual
    rep = certify(u1)
    assert not rep.is_quadratic
    assert rep.w_range > 1e-2
    # w has no interior extremum: it increases monotonically across the kink
    from logflow.expander import _w_field
    w = _w_field(u1)[dom.interior()]
    interior_max_at_edge = np.argmax(w) in (0, w.size - 1)
    interior_min_at_edge = np.argmin(w) in (0, w.size - 1)
    assert interior_max_at_edge and interior_min_at_edge


def test_bernstein_residual_shrinks_at_second_order():
    # ODE-accurate non-quadratic solution: the only residual left is the FD error
    from logflow.expander import line_profile
    u_exact = line_profile(a=0.0, slope0=0.5, half_width=2.5)

    def res(m):
        dom = BoxDomain(n=1, half_width=2.0, m=m)
        u = GridFunction(dom, u_exact(dom.axis), label="line-expander")
        rep = certify(u)
        assert rep.residual_norm < 5e-4  # FD error of the residual, O(h^2)
        assert not rep.is_quadratic
        return rep.bernstein_residual

    assert res(65) / res(129) > 3.0
