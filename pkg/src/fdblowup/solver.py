"""Backward-Euler / Newton integration of u_t = Lap(u^m) and the (eps, M) limit driver."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (Ball, BoundaryProfile, Field, Grid, ModelParams, Trajectory,
                   make_grid, probe_mask)
from .errors import (DomainError, ParameterError, PositivityError, ShapeError,
                     SolverError)
from .initial_data import build_u0, lift_boundary, regularize, sample_to_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    dt0: float = 1e-6
    growth: float = 1.1
    dt_max: float = 0.05
    dt_min: float = 1e-8
    newton_tol: float = 1e-10
    max_newton: int = 30
    linear_tol: float = 1e-8

    def __post_init__(self):
        if not (self.dt0 > 0 and self.dt_max > 0 and self.dt_min > 0):
            raise ParameterError("time steps must be positive")
        if self.growth < 1:
            raise ParameterError("dt growth factor must be >= 1")
        if not (self.newton_tol > 0 and self.linear_tol > 0):
            raise ParameterError("tolerances must be positive")
        if self.max_newton < 1:
            raise ParameterError("max_newton must be >= 1")


@dataclass(frozen=True)
class LimitSchedule:
    eps_list: tuple[float, ...]
    M_list: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        Ms = tuple(float(M) for M in self.M_list)
        object.__setattr__(self, "eps_list", eps)
        object.__setattr__(self, "M_list", Ms)
        if not eps or not Ms:
            raise ParameterError("limit schedule needs at least one eps and one M")
        if any(not 0 < e < 1 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ParameterError("eps_list must be strictly decreasing inside (0,1)")
        if any(M <= 0 for M in Ms) or any(b <= a for a, b in zip(Ms, Ms[1:])):
            raise ParameterError("M_list must be strictly increasing and positive")


class _Operator:
    """Discrete flux operator restricted to the unknown (non-Dirichlet) nodes."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.U = grid.unknowns
        self.D = grid.dirichlet
        self.V = np.asarray(grid.vol)[self.U]
        if grid.kind == "radial":
            c = np.asarray(grid.cond)
            N = grid.size
            cr = np.zeros(N)
            cl = np.zeros(N)
            cr[:-1] = c
            cl[1:] = c
            self.cl, self.cr = cl[self.U], cr[self.U]
            self.row_abs = self.cl + self.cr
        else:
            K = grid.stiffness()
            self.K = K
            self.K_UU = K[self.U][:, self.U].tocsc()
            self.row_abs = np.asarray(abs(K[self.U]).sum(axis=1)).ravel() / 2

    def residual_scale(self, u: np.ndarray, dt: float, m: float) -> np.ndarray:
        """Size of the terms in the nodal balance, used to normalize residuals.

        Dividing by V*u alone makes the test unreachable in the tiny cells near
        r_min, where rounding in the flux terms exceeds newton_tol * V * u.
        """
        uU = u[self.U]
        return self.V * uU + dt * self.row_abs * uU ** m

    def flux(self, w: np.ndarray) -> np.ndarray:
        if self.grid.kind == "radial":
            return self.grid.flux_divergence(w)[self.U]
        return (self.K @ w)[self.U]

    def solve_jacobian(self, dt: float, d: np.ndarray, rhs: np.ndarray, linear_tol: float):
        """Solve (diag(V) - dt K_UU diag(d)) x = rhs."""
        if self.grid.kind == "radial":
            nU = self.U.size
            ab = np.zeros((3, nU))
            ab[1] = self.V + dt * (self.cl + self.cr) * d
            ab[0, 1:] = -dt * self.cr[:-1] * d[1:]
            ab[2, :-1] = -dt * self.cl[1:] * d[:-1]
            return scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
        J = sp.diags(self.V) - dt * (self.K_UU @ sp.diags(d))
        x = spla.spsolve(J.tocsc(), rhs)
        err = np.linalg.norm(J @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not err <= linear_tol:
            raise SolverError("linear solve inaccurate", err)
        return x


def _newton(op: _Operator, u_old: np.ndarray, bvals: np.ndarray, dt: float,
            m: float, cfg: SolverConfig) -> tuple[np.ndarray, int, float]:
    u = u_old.copy()
    u[op.D] = bvals
    U = op.U
    res = np.inf
    for it in range(cfg.max_newton + 1):
        G = op.V * (u[U] - u_old[U]) - dt * op.flux(u ** m)
        res = float(np.max(np.abs(G) / op.residual_scale(u, dt, m))) if U.size else 0.0
        if res <= cfg.newton_tol:
            return u, it, res
        if it == cfg.max_newton:
            break
        d = m * u[U] ** (m - 1.0)
        step = op.solve_jacobian(dt, d, G, cfg.linear_tol)
        # u^m is concave, so full steps can overshoot below zero near steep fronts;
        # damp so no node loses more than half its value in one iterate
        worst = float(np.max(step / u[U]))
        u[U] -= step * (0.5 / worst if worst >= 1.0 else 1.0)
        if not np.all(np.isfinite(u[U])) or np.any(u[U] <= 0):
            raise PositivityError("Newton iterate lost positivity", res)
    raise SolverError(f"Newton failed to converge in {cfg.max_newton} iterations", res)


def _boundary_values(grid: Grid, t: float, f: BoundaryProfile,
                     f_inner: BoundaryProfile | None) -> np.ndarray:
    D = grid.dirichlet
    vals = np.full(D.size, f(t))
    if grid.kind == "radial" and grid.inner == "dirichlet":
        if f_inner is None:
            raise ParameterError("annulus runs need inner boundary data f_inner")
        vals[0] = f_inner(t)
    if np.any(vals <= 0):
        raise ParameterError(f"Dirichlet data must be positive at t={t}")
    return vals


def step_implicit(state: Field, dt: float, f: BoundaryProfile, cfg: SolverConfig,
                  m: float, f_inner: BoundaryProfile | None = None) -> Field:
    """One backward-Euler step, Newton-solved in the variable u."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if not state.is_positive:
        raise PositivityError("input state must be strictly positive")
    op = _Operator(state.grid)
    t_new = state.time + dt
    u, _, _ = _newton(op, np.array(state.values), _boundary_values(state.grid, t_new, f, f_inner),
                      dt, m, cfg)
    return Field(state.grid, u, t_new)


def solve(u0field: Field, f: BoundaryProfile, t_end: float, output_times: Sequence[float],
          cfg: SolverConfig, m: float, f_inner: BoundaryProfile | None = None,
          record_steps: bool = False, land_on_outputs: bool = True) -> Trajectory:
    """Integrate from ``u0field`` to ``t_end``.

    The step sequence dt0, dt0*growth, ... (capped at dt_max) depends only on
    ``cfg`` and the requested times, so runs with different data share the
    same time levels.  A failed step is split into halves (recursively, down
    to dt_min) without altering the rest of the sequence.  Snapshots always
    include the initial time.  With ``land_on_outputs`` the steps are clipped
    to hit each requested time exactly; otherwise snapshots are linearly
    interpolated between the straddling time levels.
    """
    if not u0field.is_positive:
        raise PositivityError("initial field must be strictly positive")
    grid = u0field.grid
    op = _Operator(grid)
    t0 = u0field.time
    if t_end <= t0:
        raise ParameterError("t_end must exceed the initial time")
    outs = sorted({float(t) for t in output_times if t0 < t <= t_end} | {float(t_end)})

    times, snaps = [t0], [np.array(u0field.values)]
    step_t, iters, resids = [], [], []

    def advance(u, t, h):
        try:
            unew, it, res = _newton(op, u, _boundary_values(grid, t + h, f, f_inner), h, m, cfg)
        except SolverError as exc:
            if h / 2 < cfg.dt_min:
                raise SolverError(f"step at t={t:.6g} failed with dt at floor: {exc}",
                                  exc.last_residual) from exc
            log.debug("step rejected at t=%g dt=%g; halving", t, h)
            umid = advance(u, t, h / 2)
            return advance(umid, t + h / 2, h / 2)
        step_t.append(t + h)
        iters.append(it)
        resids.append(res)
        if record_steps:
            times.append(t + h)
            snaps.append(unew)
        return unew

    if record_steps:
        land_on_outputs = True
    u, t, dt = np.array(u0field.values), t0, cfg.dt0
    k_out = 0
    while k_out < len(outs):
        target = outs[k_out]
        h = dt
        clipped = False
        if land_on_outputs and t + h >= target * (1 - 1e-12):
            h, clipped = target - t, True
        h = min(h, t_end - t)
        unew = advance(u, t, h)
        tnew = t + h if not clipped else target
        while k_out < len(outs) and outs[k_out] <= tnew * (1 + 1e-12):
            if not record_steps:
                w = (outs[k_out] - t) / h
                times.append(outs[k_out])
                snaps.append((1 - w) * u + w * unew)
            k_out += 1
        u, t = unew, tnew
        if not clipped:
            dt = min(dt * cfg.growth, cfg.dt_max)
    return Trajectory(grid, np.array(times), np.array(snaps), np.array(step_t),
                      np.array(iters, dtype=int), np.array(resids))


# ---------------------------------------------------------------------------
# double limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DoubleLimitReport:
    runs: dict
    schedule: LimitSchedule
    eps_violation: float     # max over probe of u_{eps_small,M} - u_{eps_large,M}
    M_violation: float       # max over probe of u_{eps,M_small} - u_{eps,M_large}
    tolerance: float
    cauchy_eps: float        # sup |u_finest - u_(next eps)| on the probe
    cauchy_M: float          # sup |u_finest - u_(next M)| on the probe
    limit: Trajectory = field(repr=False)

    @property
    def monotone_in_eps(self) -> bool:
        return self.eps_violation <= self.tolerance

    @property
    def monotone_in_M(self) -> bool:
        return self.M_violation <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.monotone_in_eps and self.monotone_in_M


def run_regularized(params: ModelParams, eps: float, M: float, f: BoundaryProfile,
                    t_end: float, cfg: SolverConfig, grid: Grid | None = None,
                    output_times: Sequence[float] = (), f_inner: BoundaryProfile | None = None,
                    u0=None, **kw) -> Trajectory:
    """Solve the problem with data min(u0, M) + eps and f + eps."""
    if not params.strict:
        raise ParameterError("params built with strict=False cannot be simulated")
    grid = grid or make_grid(params.domain, params.n)
    u0 = build_u0(params) if u0 is None else u0
    field0 = sample_to_grid(regularize(u0, M, eps), grid)
    fi = None if f_inner is None else lift_boundary(f_inner, eps)
    return solve(field0, lift_boundary(f, eps), t_end, output_times, cfg, params.m, fi, **kw)


def double_limit_run(params: ModelParams, schedule: LimitSchedule, f: BoundaryProfile,
                     t_end: float, cfg: SolverConfig, grid: Grid | None = None,
                     output_times: Sequence[float] | None = None, probe: np.ndarray | None = None,
                     f_inner: BoundaryProfile | None = None, tol_mono_rel: float = 1e-6,
                     workers: int = 1) -> DoubleLimitReport:
    """Run every (eps, M) pair of the schedule and check the monotone limits.

    Runs are independent and may execute concurrently; results are joined in
    schedule order so the report does not depend on ``workers``.
    """
    if len(schedule.eps_list) < 2 or len(schedule.M_list) < 2:
        raise ParameterError("double limit needs at least two eps and two M values")
    grid = grid or make_grid(params.domain, params.n)
    if output_times is None:
        output_times = np.linspace(0, t_end, 11)[1:]
    mask = probe_mask(grid, params) if probe is None else probe
    keys = [(e, M) for M in schedule.M_list for e in schedule.eps_list]

    def job(key):
        return run_regularized(params, key[0], key[1], f, t_end, cfg, grid, output_times, f_inner)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            trajs = list(ex.map(job, keys))
    else:
        trajs = [job(k) for k in keys]
    runs = dict(zip(keys, trajs))

    eps_l, M_l = schedule.eps_list, schedule.M_list
    finest = runs[(eps_l[-1], M_l[-1])]
    scale = float(np.max(np.abs(finest.values[:, mask])))
    v_eps = max(float(np.max(runs[(e2, M)].values[:, mask] - runs[(e1, M)].values[:, mask]))
                for M in M_l for e1, e2 in zip(eps_l, eps_l[1:]))
    v_M = max(float(np.max(runs[(e, M1)].values[:, mask] - runs[(e, M2)].values[:, mask]))
              for e in eps_l for M1, M2 in zip(M_l, M_l[1:]))
    c_eps = float(np.max(np.abs(finest.values[:, mask] - runs[(eps_l[-2], M_l[-1])].values[:, mask])))
    c_M = float(np.max(np.abs(finest.values[:, mask] - runs[(eps_l[-1], M_l[-2])].values[:, mask])))
    return DoubleLimitReport(runs, schedule, v_eps, v_M, tol_mono_rel * scale, c_eps, c_M, finest)


# ---------------------------------------------------------------------------
# exact solution and residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactSingularSolution:
    """u*(x,t) = (a (T-t))^{1/(1-m)} |x|^{-2/(1-m)}, a = 2m(n-2-nm)/(1-m)."""
    n: int
    m: float
    T: float

    @property
    def a(self) -> float:
        n, m = self.n, self.m
        return 2 * m * (n - 2 - n * m) / (1 - m)

    def __call__(self, x, t: float) -> np.ndarray:
        if t >= self.T:
            raise DomainError(f"exact solution defined only for t < T={self.T}")
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if x.ndim <= 1 else np.linalg.norm(x, axis=-1)
        m = self.m
        return (self.a * (self.T - t)) ** (1 / (1 - m)) * r ** (-2 / (1 - m))

    def boundary(self, radius: float) -> BoundaryProfile:
        """Dirichlet data u*(radius, t); decreasing in t."""
        return BoundaryProfile.from_function(lambda t: float(self(np.array([radius]), t)[0]),
                                             lower=0.0, monotone_after=0.0)


def exact_singular_solution(n: int, m: float, T: float) -> ExactSingularSolution:
    from .core import check_exponent_range
    check_exponent_range(n, m)
    if not T > 0:
        raise ParameterError("extinction time T must be positive")
    return ExactSingularSolution(n, m, T)


def pde_residual(traj: Trajectory, m: float, scaled: bool = True) -> np.ndarray:
    """Per-interval sup over unknown nodes of (u_{k+1}-u_k)/dt - Lap_h(u_{k+1}^m).

    With ``scaled`` (default) each node's residual is multiplied by
    dt*V/(V*u + dt*|K|*u^m), the normalization under which the Newton
    iteration drives it below ``newton_tol``.
    """
    if len(traj) < 2:
        raise ShapeError("pde_residual needs at least two snapshots")
    grid = traj.grid
    U = grid.unknowns
    op = _Operator(grid)
    out = np.empty(len(traj) - 1)
    for k in range(len(traj) - 1):
        dt = traj.times[k + 1] - traj.times[k]
        u0, u1 = traj.values[k], traj.values[k + 1]
        r = (u1 - u0)[U] / dt - grid.laplacian(u1 ** m)[U]
        if scaled:
            r = r * dt * op.V / op.residual_scale(u1, dt, m)
        out[k] = float(np.max(np.abs(r)))
    return out


def trajectories_compatible(a: Trajectory, b: Trajectory) -> None:
    if a.grid is not b.grid and (a.grid.size != b.grid.size or not np.allclose(
            getattr(a.grid, "r", getattr(a.grid, "x", None)),
            getattr(b.grid, "r", getattr(b.grid, "x", None)))):
        raise ShapeError("trajectories live on different grids")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ShapeError("trajectories have different snapshot times")


__all__ = [
    "SolverConfig", "LimitSchedule", "step_implicit", "solve", "double_limit_run",
    "run_regularized", "DoubleLimitReport", "exact_singular_solution",
    "ExactSingularSolution", "pde_residual", "Ball",
]
