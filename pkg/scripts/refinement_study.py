"""Spatial order of the scheme against the closed-form extinction solution on an annulus."""
import argparse

import numpy as np

from fdblowup.core import Annulus, Field, make_grid
from fdblowup.solver import SolverConfig, exact_singular_solution, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, nargs="+", default=[11, 21, 41, 81, 161])
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--t", type=float, default=0.5)
    args = ap.parse_args()
    ex = exact_singular_solution(3, 0.2, 1.0)
    cfg = SolverConfig(dt0=args.dt, growth=1.0, dt_max=args.dt)
    prev = None
    print("nodes,sup_error,order")
    for N in args.nodes:
        g = make_grid(Annulus(0.1, 1.0), 3, nodes=N)
        tr = solve(Field(g, ex(g.r, 0.0)), ex.boundary(1.0), args.t, [args.t], cfg, 0.2,
                   f_inner=ex.boundary(0.1))
        err = float(np.max(np.abs(tr.values[-1] - ex(g.r, args.t))))
        order = "" if prev is None else f"{np.log2(prev / err):.3f}"
        print(f"{N},{err:.6e},{order}")
        prev = err


if __name__ == "__main__":
    main()
