"""Measurable checks on trajectories: rates, differential inequalities, limits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .barriers import WeightPsi, weighted_mass
from .core import Field, ModelParams, Trajectory
from .errors import DiagnosticError, ParameterError, ShapeError
from .harmonic import default_window, fit_power_law, window_nodes
from .solver import trajectories_compatible


class ExponentFit(NamedTuple):
    gamma_hat: float
    fit_residual: float
    nodes: int


class CheckResult(NamedTuple):
    value: float
    threshold: float
    passed: bool


def _center(field_or_grid, center):
    grid = getattr(field_or_grid, "grid", field_or_grid)
    return np.zeros(grid.n) if center is None else np.asarray(center, dtype=float)


def fit_blowup_exponent(field: Field, center=None,
                        window: tuple[float, float] | None = None) -> ExponentFit:
    """Negated least-squares slope of log u against log |x - center| on ``window``."""
    grid = field.grid
    window = window or default_window(grid)
    sel, d = window_nodes(grid, _center(field, center), window)
    u = field.values[sel]
    if np.any(u <= 0):
        raise DiagnosticError("field must be positive in the fit window")
    k, res = fit_power_law(d[sel], u)
    return ExponentFit(k, res, int(sel.sum()))


def check_aronson_benilan(traj: Trajectory, T0: float, m: float, tol: float = 1e-3) -> CheckResult:
    """max of (u_{k+1}-u_k)/dt * (1-m)(t_{k+1}-T0)/u_{k+1} - 1 over interior nodes.

    Only intervals starting at or after T0 are used.  Holds for any snapshot
    spacing, since the continuous bound makes u (t-T0)^{-1/(1-m)} non-increasing.
    """
    U = traj.grid.unknowns
    t = traj.times
    ks = [k for k in range(len(traj) - 1) if t[k] >= T0 and t[k + 1] > T0]
    if not ks:
        raise DiagnosticError("trajectory has no steps after T0")
    worst = -np.inf
    for k in ks:
        u0, u1 = traj.values[k][U], traj.values[k + 1][U]
        dt = t[k + 1] - t[k]
        q = (u1 - u0) / dt * (1 - m) * (t[k + 1] - T0) / u1 - 1.0
        worst = max(worst, float(np.max(q)))
    return CheckResult(worst, tol, worst <= tol)


def check_comparison(trajA: Trajectory, trajB: Trajectory) -> np.ndarray:
    """Per snapshot, sup over nodes of (u_A - u_B)_+."""
    trajectories_compatible(trajA, trajB)
    return np.maximum(np.max(trajA.values - trajB.values, axis=1), 0.0)


def check_L1_contraction(trajA: Trajectory, trajB: Trajectory) -> np.ndarray:
    """Per snapshot, the quadrature of (u_A - u_B)_+ over the domain."""
    trajectories_compatible(trajA, trajB)
    w = trajA.grid.weights
    return np.maximum(trajA.values - trajB.values, 0.0) @ w


def non_increasing(seq: Sequence[float], tol_rel: float = 1e-4) -> CheckResult:
    """Largest rise between consecutive entries, relative to the first entry."""
    s = np.asarray(seq, dtype=float)
    scale = max(abs(s[0]), np.finfo(float).tiny) if s.size else 1.0
    rise = float(np.max(np.diff(s))) / scale if s.size > 1 else 0.0
    return CheckResult(rise, tol_rel, rise <= tol_rel)


def _probe(traj: Trajectory, probe: np.ndarray) -> np.ndarray:
    probe = np.asarray(probe, dtype=bool)
    if probe.shape != (traj.grid.size,):
        raise ShapeError("probe mask does not match the grid")
    if not probe.any():
        raise DiagnosticError("probe region is empty")
    return probe


def convergence_monitor(traj: Trajectory, target, probe: np.ndarray) -> np.ndarray:
    """t_k -> sup over the probe of |u - target|; target is a Field, array or scalar."""
    probe = _probe(traj, probe)
    tv = target.values if isinstance(target, Field) else np.broadcast_to(
        np.asarray(target, dtype=float), (traj.grid.size,))
    return np.max(np.abs(traj.values[:, probe] - tv[probe]), axis=1)


def blowup_monitor(traj: Trajectory, probe: np.ndarray) -> np.ndarray:
    """t_k -> inf over the probe of u."""
    probe = _probe(traj, probe)
    return np.min(traj.values[:, probe], axis=1)


def strictly_increasing(seq: Sequence[float]) -> bool:
    return bool(np.all(np.diff(np.asarray(seq, dtype=float)) > 0))


def eventually_decreasing(seq: Sequence[float], frac: float = 0.5, slack: float = 0.0) -> bool:
    """Non-increasing (up to ``slack``) over the last ``frac`` of the entries."""
    s = np.asarray(seq, dtype=float)
    tail = s[int(np.floor((1 - frac) * (s.size - 1))):]
    return bool(np.all(np.diff(tail) <= slack))


def laplacian_probe_residual(field: Field, m: float, probe: np.ndarray) -> float:
    """sup over the probe of |Lap_h(u^m)|, the steady-state residual."""
    probe = np.asarray(probe, dtype=bool)
    if not probe.any():
        raise DiagnosticError("probe region is empty")
    lap = field.grid.laplacian(field.values ** m)
    return float(np.max(np.abs(lap[probe])))


def gradient_scaling_check(field: Field, center, gamma: float, window: tuple[float, float],
                           m: float) -> float:
    """sup over the window of r^{gamma + gamma(1-m)/2} |grad_h u|."""
    grid = field.grid
    sel, d = window_nodes(grid, _center(field, center), window, min_nodes=1)
    g = grid.gradient(field.values)
    return float(np.max(d[sel] ** (gamma + gamma * (1 - m) / 2) * np.abs(g[sel])))


def time_derivative_scaling_check(traj: Trajectory, center, gamma: float,
                                  window: tuple[float, float]) -> float:
    """max over intervals and window nodes of r^gamma |u_{k+1} - u_k| / dt."""
    grid = traj.grid
    sel, d = window_nodes(grid, _center(grid, center), window, min_nodes=1)
    dt = np.diff(traj.times)[:, None]
    ut = np.abs(np.diff(traj.values[:, sel], axis=0)) / dt
    return float(np.max(d[sel] ** gamma * ut))


class TraceResult(NamedTuple):
    max_abs: float
    max_rel: float
    time: float


def initial_trace_check(traj: Trajectory, u0, points, params: ModelParams) -> TraceResult:
    """max |u(x, t_1) - u0(x)| at the grid nodes nearest the given points.

    ``t_1`` is the first snapshot after the initial one.  Points within
    delta1 of a singular point are rejected: u0 jumps at |x - a_i| = delta1
    and is unbounded inside.
    """
    if len(traj) < 2:
        raise DiagnosticError("need a snapshot after the initial time")
    grid = traj.grid
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if grid.kind == "radial":
        pts = pts.reshape(-1)
        for r in pts:
            if params.points and r <= params.delta1:
                raise DiagnosticError(f"point at r={r} lies within delta1 of the singular point")
        idx = np.array([int(np.argmin(np.abs(grid.r - r))) for r in pts])
        x = grid.r[idx]
    else:
        pts = pts.reshape(-1, grid.n)
        for x in pts:
            for p in params.points:
                if np.linalg.norm(x - np.asarray(p.a)) <= params.delta1:
                    raise DiagnosticError(f"point {tuple(x)} lies within delta1 of {p.a}")
        C = grid.coords
        idx = np.array([int(np.argmin(np.linalg.norm(C - x, axis=1))) for x in pts])
        x = C[idx]
    ref = np.asarray(u0(x), dtype=float)
    diff = np.abs(traj.values[1][idx] - ref)
    return TraceResult(float(diff.max()), float(np.max(diff / np.abs(ref))), float(traj.times[1]))


@dataclass(frozen=True)
class WeightedMassResult:
    masses: np.ndarray
    bounds: np.ndarray
    tolerance: float

    @property
    def margin(self) -> float:
        """min over snapshots of mass - bound (>= -tolerance passes)."""
        return float(np.min(self.masses - self.bounds))

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance


def weighted_mass_check(traj: Trajectory, w: WeightPsi, C: float,
                        tol_rel: float = 1e-4) -> WeightedMassResult:
    """int u psi >= e^{-t} int u(0) psi - C (1 - e^{-t}) along the trajectory."""
    grid = traj.grid
    center = w.center if w.center is not None else np.zeros(grid.n)
    psi = w.radial(grid.distance(center))
    if not np.all(np.isfinite(psi)):
        raise ParameterError("weight is infinite at a node; the singular point must be off-grid")
    wts = grid.weights
    masses = np.array([weighted_mass(u, psi, wts) for u in traj.values])
    decay = np.exp(-(traj.times - traj.times[0]))
    bounds = decay * masses[0] - C * (1 - decay)
    return WeightedMassResult(masses, bounds, tol_rel * abs(masses[0]))


def truncation_bounds(traj: Trajectory, eps: float, upper: float, tol: float = 1e-8) -> CheckResult:
    """Largest excursion of u outside [eps, upper + eps]."""
    v = traj.values
    out = max(float(eps - v.min()), float(v.max() - (upper + eps)), 0.0)
    return CheckResult(out, tol, out <= tol)


class EmpiricalRegime(NamedTuple):
    regime: str
    removability_exponent: float
    probe_inf: np.ndarray
    probe_dev: np.ndarray


def empirical_regime(traj: Trajectory, params: ModelParams, probe: np.ndarray,
                     target=None, window: tuple[float, float] | None = None) -> EmpiricalRegime:
    """Regime read off a finished run, without consulting the exponents in ``params``.

    BlowUpEverywhere when u^m at the last snapshot still grows at least like
    r^{2-n} near the singular point (a non-removable source) and the probe
    infimum increases strictly over the second half of the run;
    ConvergeToHarmonic when the fitted growth of u^m is below n-2.  Anything
    else is reported as Undetermined.
    """
    from .core import BLOWUP, CONVERGE_HARMONIC
    from .harmonic import removability_exponent
    grid = traj.grid
    target = params.mu0 if target is None else target
    inf_seq = blowup_monitor(traj, probe)
    dev_seq = convergence_monitor(traj, target, probe)
    last = traj.field(len(traj) - 1)
    if params.points:
        p = params.points[0]
        window = window or default_window(grid, params.delta1)
        k = removability_exponent(last, params.m, p.a, window)
    else:
        k = 0.0
    half = inf_seq[len(inf_seq) // 2:]
    if k >= params.n - 2 and strictly_increasing(half):
        regime = BLOWUP
    elif k < params.n - 2:
        regime = CONVERGE_HARMONIC
    else:
        regime = "Undetermined"
    return EmpiricalRegime(regime, k, inf_seq, dev_seq)


__all__ = [
    "EmpiricalRegime", "empirical_regime",
    "ExponentFit", "CheckResult", "fit_blowup_exponent", "check_aronson_benilan",
    "check_comparison", "check_L1_contraction", "non_increasing", "convergence_monitor",
    "blowup_monitor", "strictly_increasing", "eventually_decreasing",
    "laplacian_probe_residual", "gradient_scaling_check", "time_derivative_scaling_check",
    "initial_trace_check", "TraceResult", "weighted_mass_check", "WeightedMassResult",
    "truncation_bounds",
]
