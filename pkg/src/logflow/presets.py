"""Named initial-data families and ready-to-run experiment presets.

Initial data comes in four families:

* ``quadratic(A, b, c)``                exact solutions, fixed points of every check
* ``quadratic_plus_bump(A, amp, width)``  pinched data with a decaying Gaussian dent
* ``linear_plus_bump(b, amp, width)``   bounded-gradient data Du = b + amp e^{-x1^2/w^2}
* ``two_slope(c_minus, c_plus)``        degree-2 homogeneous line data with a slope jump

Each experiment preset is a full configuration dictionary consumed by
:mod:`logflow.config`; the acceptance suite runs these presets verbatim.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .flow import QuadraticFarField, ReferenceSolution
from .grid import BoxDomain, GridFunction

__all__ = ["make_initial_data", "experiment_preset", "preset_names", "INITIAL_FAMILIES"]

INITIAL_FAMILIES = ("quadratic", "quadratic_plus_bump", "linear_plus_bump", "two_slope")


def _as_matrix(A, n):
    if A is None:
        return np.eye(n)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 0:
        return float(A) * np.eye(n)
    return np.atleast_2d(A)


def make_initial_data(domain: BoxDomain, spec: dict, tau: float,
                      rng: np.random.Generator | None = None):
    """Build (u0, boundary_model) from an initial-data description.

    The boundary model is the exact far-field closure of the family: the
    evolved quadratic for the first two families, the closed-form reference
    for the gradient-bump (heat endpoint) and two-slope families.
    """
    kind = spec.get("kind")
    grids = domain.meshgrid()
    n = domain.n
    if kind == "quadratic":
        A = _as_matrix(spec.get("A"), n)
        b = np.asarray(spec.get("b", np.zeros(n)), dtype=np.float64)
        c = float(spec.get("c", 0.0))
        vals = c * np.ones(domain.shape)
        for i in range(n):
            vals += b[i] * grids[i]
            for j in range(n):
                vals += 0.5 * A[i, j] * grids[i] * grids[j]
        u0 = GridFunction(domain, vals, label="quadratic")
        boundary = QuadraticFarField(A, b, c)
    elif kind == "quadratic_plus_bump":
        A = _as_matrix(spec.get("A"), n)
        amp = float(spec.get("amplitude", 0.1))
        width = float(spec.get("width", 1.0))
        r2 = sum(g ** 2 for g in grids)
        vals = amp * np.exp(-r2 / width ** 2)
        for i in range(n):
            for j in range(n):
                vals += 0.5 * A[i, j] * grids[i] * grids[j]
        u0 = GridFunction(domain, vals, label="quadratic_plus_bump")
        boundary = QuadraticFarField(A, np.zeros(n), 0.0)
    elif kind == "linear_plus_bump":
        b = np.asarray(spec.get("b", np.zeros(n)), dtype=np.float64)
        amp = float(spec.get("amplitude", 0.1))
        width = float(spec.get("width", 1.0))
        if tau != 0.0:
            raise ConfigError("linear_plus_bump data is not convex: only the "
                              "tau = 0 endpoint can evolve it")
        from scipy.special import erf

        def reference(pts, t):
            s = math.sqrt(width ** 2 + 4.0 * t)
            vals = pts @ b
            return vals + amp * width * math.sqrt(math.pi) / 2.0 * erf(pts[:, 0] / s)

        u0 = GridFunction(domain, reference(domain.points(), 0.0).reshape(domain.shape),
                          label="linear_plus_bump")
        boundary = ReferenceSolution(reference)
    elif kind == "two_slope":
        if n != 1:
            raise ConfigError("two_slope data lives on the line (n = 1)")
        cm = float(spec.get("c_minus", 0.7))
        cp = float(spec.get("c_plus", 1.3))
        if min(cm, cp) <= 0:
            raise ConfigError("two_slope curvatures must be positive")
        x = grids[0]
        u0 = GridFunction(domain, 0.5 * np.where(x < 0, cm, cp) * x ** 2,
                          label="two_slope")
        # per-side quadratic evolution: rate tau ln c + (1 - tau) c
        def reference(pts, t, _cm=cm, _cp=cp, _tau=tau):
            c = np.where(pts[:, 0] < 0, _cm, _cp)
            rate = _tau * np.log(c) + (1.0 - _tau) * c
            return 0.5 * c * pts[:, 0] ** 2 + t * rate

        boundary = ReferenceSolution(reference)
    else:
        raise ConfigError(
            f"unknown initial data family {kind!r}; choose from {INITIAL_FAMILIES}")

    noise = float(spec.get("noise", 0.0))
    if noise:
        if rng is None:
            rng = np.random.default_rng(0)
        bumpless = u0.values + noise * rng.standard_normal(domain.shape)
        bumpless[domain.ring_mask()] = u0.values[domain.ring_mask()]
        u0 = GridFunction(domain, bumpless, label=u0.label + "+noise")
    return u0, boundary


# ---------------------------------------------------------------------------
# experiment presets
# ---------------------------------------------------------------------------

_PRESETS: dict[str, dict] = {
    "quadratic-exact": {
        "pipeline": "quadratic_exact",
        "grid": {"n": 2, "L": 2.0, "m": 65},
        "initial": {"kind": "quadratic", "A": [[2.0, 0.0], [0.0, 2.0]]},
        "flow": {"tau": 1.0, "t_end": 1.0, "stepper": "rk2"},
        "check": {"sup_error": 1e-8, "runtime_s": 10.0},
    },
    "condition-b-preservation": {
        "pipeline": "condition_b",
        "grid": {"n": 1, "L": 6.0, "m": 65},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 2.0, "stepper": "rk2"},
        "check": {"drift": 5e-3},
    },
    "heat-oracle": {
        "pipeline": "heat_oracle",
        "grid": {"n": 1, "L": 4.0, "m": 65},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 0.0, "t_end": 0.1, "stepper": "rk2"},
        "check": {"sup_diff": 5e-4},
    },
    "expander-stationarity": {
        "pipeline": "expander_stationarity",
        "grid": {"n": 1, "L": 2.0, "m": 65},
        # slope0 != 0 selects the genuinely non-quadratic line expander; the
        # centred profiles are exact parabolas whose residual is pure roundoff
        "expander": {"a": -0.1, "slope0": 0.5, "r_max": 2.5,
                     "times": [1.0, 2.0, 4.0], "dt_probe": 1e-3},
        "check": {"residual": 0.05},
    },
    "expander-cross-validation": {
        "pipeline": "expander_cross",
        "grid": {"n": 1, "L": 1.5, "m": 129},
        "expander": {"a": -0.1, "r_max": 2.0, "perturbation": 5e-3},
        "check": {"profile_gap": 1e-4, "newton_residual": 1e-10,
                  "newton_iterations": 15},
    },
    "legendre-duality": {
        "pipeline": "legendre_dual",
        "grid": {"n": 1, "L": 4.0, "m": 65},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 0.505,
                 "snapshot_times": [0.495, 0.5, 0.505]},
        "check": {"quadratic_residual": 1e-8, "bump_residual": 1e-2},
    },
    "mcf-correspondence": {
        "pipeline": "mcf_verify",
        "grid": {"n": 1, "L": 4.0, "m": 129},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 1.0, "store_every": 1,
                 "monitor_every": 25},
        "mcf": {"seeds": [[-0.8], [-0.6], [-0.4], [-0.2], [0.0],
                          [0.2], [0.4], [0.6], [0.8]],
                "t_start": 0.1},
        "check": {"deviation": 5e-3},
    },
    "decay-rates": {
        "pipeline": "decay",
        "grid": {"n": 1, "L": 12.0, "m": 129},
        "initial": {"kind": "two_slope", "c_minus": 0.7, "c_plus": 1.3},
        "flow": {"tau": 1.0, "t_end": 8.0, "monitor_every": 10,
                 "snapshot_times": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]},
        "check": {"exponent3": [-1.3, -0.7], "exponent4": [-2.4, -1.6],
                  "runtime_s": 120.0},
    },
    "blowdown-convergence": {
        "pipeline": "blowdown",
        "grid": {"n": 1, "L": 8.0, "m": 129},
        "initial": {"kind": "quadratic_plus_bump", "A": 1.0,
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 1.0, "t_end": 16.0, "monitor_every": 10,
                 "snapshot_times": [1.0, 2.0, 4.0, 8.0, 16.0]},
        "analysis": {"window": 1.0, "monotone_from": 2, "final_tol": 0.02},
        "check": {"final_error": 0.02},
    },
    "plane-convergence": {
        "pipeline": "plane",
        "grid": {"n": 1, "L": 8.0, "m": 129},
        "initial": {"kind": "linear_plus_bump", "b": [0.0],
                    "amplitude": 0.1, "width": 1.0},
        "flow": {"tau": 0.0, "t_end": 8.0, "monitor_every": 10,
                 "snapshot_times": [0.5, 1.0, 2.0, 4.0, 8.0]},
        "analysis": {"window": 2.0, "final_tol": 0.02},
        "check": {"final_max_gradient": 0.02},
    },
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def experiment_preset(name: str) -> dict:
    """Deep copy of a named preset; unknown names list the catalogue."""
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available presets: {', '.join(preset_names())}")
    import copy
    return copy.deepcopy(_PRESETS[name])
