#!/usr/bin/env python3
"""Grid-refinement study: measured convergence orders of the main error channels.

For a sequence of resolutions this prints the interior error of

  * the flow against the Gaussian-convolution oracle (tau = 0),
  * the stationary-profile residual of the non-quadratic line expander,
  * the dual-flow residual of the conjugated trajectory,

together with the observed order between consecutive grids.

Usage:
    python scripts/refinement_study.py [--levels 33 65 129]
"""

import argparse
import math

import numpy as np

from logflow.expander import line_profile
from logflow.flow import QuadraticFarField, pde_residual, run
from logflow.grid import BoxDomain, GridFunction
from logflow.heat import heat_solve
from logflow.legendre import dual_flow_check


def heat_gap(m: int) -> float:
    dom = BoxDomain(n=1, half_width=4.0, m=m)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + 0.1 * np.exp(-x ** 2))
    ff = QuadraticFarField(np.eye(1), np.zeros(1))
    traj = run(u0, tau=0.0, t_end=0.1, boundary=ff)
    oracle = heat_solve(u0, 0.1, ff)
    return float(np.max(np.abs((traj.state.u.values - oracle.values)[dom.interior()])))


_LINE = line_profile(a=-0.1, slope0=0.5, half_width=3.0)


def expander_residual(m: int) -> float:
    dom = BoxDomain(n=1, half_width=2.0, m=m)
    dt = 1e-3

    def family(t):
        return GridFunction(dom, t * _LINE(dom.axis / math.sqrt(t)))

    return pde_residual(family(1.0), family(1.0 + dt / 2), family(1.0 + dt),
                        dt, tau=1.0)


def dual_residual(m: int) -> float:
    dom = BoxDomain(n=1, half_width=4.0, m=m)
    x = dom.axis
    u0 = GridFunction(dom, 0.5 * x ** 2 + 0.1 * np.exp(-x ** 2))
    delta = 0.005 * (64 / (m - 1)) ** 2
    traj = run(u0, tau=1.0, t_end=0.5 + delta,
               boundary=QuadraticFarField(np.eye(1), np.zeros(1)),
               snapshot_times=[0.5 - delta, 0.5, 0.5 + delta])
    return dual_flow_check(list(traj.snapshots))


def table(name, fn, levels):
    errs = [fn(m) for m in levels]
    print(f"\n{name}")
    print(f"  {'m':>5s} {'error':>12s} {'order':>7s}")
    for k, (m, e) in enumerate(zip(levels, errs)):
        order = "" if k == 0 else f"{math.log2(errs[k - 1] / e):7.2f}"
        print(f"  {m:5d} {e:12.3e} {order:>7s}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", nargs="*", type=int, default=[33, 65, 129])
    args = parser.parse_args()
    table("flow vs Gaussian-convolution oracle (tau = 0, t = 0.1)",
          heat_gap, args.levels)
    table("self-similar stationarity residual (line expander)",
          expander_residual, args.levels)
    table("dual-flow residual of the conjugated trajectory",
          dual_residual, args.levels)


if __name__ == "__main__":
    main()
