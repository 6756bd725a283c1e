"""Large-time behaviour for a range of blow-up exponents: probe infimum and deviation over time."""
import argparse

import numpy as np

from fdblowup.core import Ball, BoundaryProfile, ModelParams, SingularPoint, make_grid, probe_mask
from fdblowup.diagnostics import blowup_monitor, convergence_monitor, empirical_regime
from fdblowup.initial_data import build_u0
from fdblowup.solver import SolverConfig, run_regularized


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gammas", type=float, nargs="+", default=[2.8, 3.0, 4.0, 4.9, 5.5, 6.0])
    ap.add_argument("--t-end", type=float, default=50.0)
    ap.add_argument("--nodes", type=int, default=200)
    args = ap.parse_args()
    outs = [t for t in (1, 5, 10, 20, 30, 40, 50, 100) if t < args.t_end] + [args.t_end]
    print("gamma,t,probe_inf,probe_dev,empirical_regime")
    for gamma in args.gammas:
        p = ModelParams(3, 0.2, (SingularPoint((0, 0, 0), 1.0, gamma),), 1.0, Ball(1.0), 0.3)
        g = make_grid(p.domain, 3, nodes=args.nodes)
        M = float(build_u0(p)(g.r[:1])[0])
        tr = run_regularized(p, 1e-3, M, BoundaryProfile.constant(1.0), args.t_end,
                             SolverConfig(), g, outs)
        mk = probe_mask(g, p)
        inf, dev = blowup_monitor(tr, mk), convergence_monitor(tr, 1.0, mk)
        verdict = empirical_regime(tr, p, mk).regime
        for t, a, b in zip(tr.times, inf, dev):
            print(f"{gamma},{t:g},{a:.6g},{b:.6g},{verdict}")


if __name__ == "__main__":
    main()
