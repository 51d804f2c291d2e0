"""Gaussian-convolution oracle: closed forms, semigroup, cross-check vs the flow."""

import numpy as np
import pytest

from logflow.errors import TailError
from logflow.flow import QuadraticFarField, run
from logflow.grid import BoxDomain, GridFunction
from logflow.heat import gaussian_tail_mass, heat_solve


def iso_far_field(n, scale=1.0):
    return QuadraticFarField(scale * np.eye(n), np.zeros(n), 0.0)


def test_quadratic_gains_trace_times_t():
    dom = BoxDomain(n=2, half_width=2.0, m=33)
    x1, x2 = dom.meshgrid()
    u0 = GridFunction(dom, 0.5 * (x1 ** 2 + x2 ** 2))
    out = heat_solve(u0, t=0.07, far_field=iso_far_field(2))
    assert np.max(np.abs(out.values - (u0.values + 2 * 0.07))) < 1e-12


def test_constant_is_preserved():
    dom = BoxDomain(n=1, half_width=3.0, m=65)
    u0 = GridFunction(dom, np.full(dom.shape, 1.25))
    out = heat_solve(u0, t=0.05, far_field=QuadraticFarField(np.zeros((1, 1)),
                                                             np.zeros(1), 1.25))
    assert np.max(np.abs(out.values - 1.25)) < 1e-12


def test_flow_cross_check_on_bumped_quadratic():
    dom = BoxDomain(n=1, half_width=4.0, m=97)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + np.exp(-x ** 2))
    ff = iso_far_field(1)
    oracle = heat_solve(u0, t=0.1, far_field=ff)
    traj = run(u0, tau=0.0, t_end=0.1, boundary=ff)
    sl = dom.interior()
    gap = np.max(np.abs((traj.state.u.values - oracle.values)[sl]))
    assert gap < 5e-4


def test_semigroup_property():
    dom = BoxDomain(n=1, half_width=5.0, m=129)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + 0.3 * np.exp(-x ** 2))
    ff = iso_far_field(1)
    # the far-field completion itself evolves: after time s it has gained s * tr A
    ff_evolved = QuadraticFarField(ff.A, ff.b, ff.c + 0.04 * np.trace(ff.A))
    two_step = heat_solve(heat_solve(u0, 0.04, ff), 0.06, ff_evolved)
    one_step = heat_solve(u0, 0.10, ff)
    sl = dom.interior()
    assert np.max(np.abs((two_step.values - one_step.values)[sl])) < 1e-6


def test_matches_closed_form_spreading_gaussian():
    # heat of a*exp(-x^2/w^2) is a*(w/s)exp(-x^2/s^2) with s^2 = w^2 + 4t
    dom = BoxDomain(n=1, half_width=5.0, m=129)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + 0.3 * np.exp(-x ** 2))
    out = heat_solve(u0, 0.1, iso_far_field(1))
    s2 = 1 + 4 * 0.1
    exact = 0.5 * x ** 2 + 0.1 + 0.3 / np.sqrt(s2) * np.exp(-x ** 2 / s2)
    assert np.max(np.abs(out.values - exact)[dom.interior()]) < 1e-10


def test_max_principle_on_decaying_part():
    dom = BoxDomain(n=1, half_width=5.0, m=129)
    x = dom.axis
    bump = 0.3 * np.exp(-x ** 2)
    u0 = GridFunction(dom, 0.5 * x ** 2 + bump)
    out = heat_solve(u0, 0.2, iso_far_field(1))
    evolved_bump = out.values - (0.5 * x ** 2 + 0.2)
    assert np.max(np.abs(evolved_bump)) <= np.max(np.abs(bump)) + 1e-12


def test_tail_error_when_t_too_large():
    dom = BoxDomain(n=1, half_width=2.0, m=33)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + np.exp(-x ** 2))
    with pytest.raises(TailError):
        heat_solve(u0, t=5.0, far_field=iso_far_field(1))


def test_tail_mass_monotone_in_t():
    a = gaussian_tail_mass(np.zeros(1), 2.0, 0.01, 1)
    b = gaussian_tail_mass(np.zeros(1), 2.0, 0.1, 1)
    assert a < b < 1.0
