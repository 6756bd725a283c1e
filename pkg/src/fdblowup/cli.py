"""Config-driven runner: ``run``, ``sweep`` and ``check`` subcommands.

Config files are flat ``dotted.key = value`` lines; ``#`` starts a comment.
Lists are comma separated.  See README.md for the key reference.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .barriers import C_psi, M0_of, WeightPsi, barrier_for, verify_barrier
from .core import (OUTSIDE, Annulus, Ball, BoundaryProfile, Box, ModelParams, RegimeReport,
                   SingularPoint, classify_regime, compute_delta0, make_grid, probe_mask)
from .diagnostics import (blowup_monitor, check_aronson_benilan, convergence_monitor,
                          empirical_regime, fit_blowup_exponent, gradient_scaling_check,
                          initial_trace_check, laplacian_probe_residual, strictly_increasing,
                          truncation_bounds, weighted_mass_check)
from .errors import ConfigError, FDBlowupError, ParameterError, SolverError
from .harmonic import default_window, harmonic_limit, removability_exponent
from .initial_data import build_u0
from .solver import LimitSchedule, SolverConfig, double_limit_run, run_regularized

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

DIAGNOSTICS = (
    "truncation_bounds", "double_limit", "convergence", "blowup", "aronson_benilan",
    "exponent_fit", "removable", "barrier", "weighted_mass", "laplacian_probe",
    "initial_trace", "gradient_scaling", "regime_agreement",
)

TOLERANCES = {
    "bounds": 1e-8,
    "mono_rel": 1e-6,
    "convergence": 0.05,
    "blowup_factor": 10.0,
    "aronson_benilan": 1e-3,
    "exponent": 0.15,
    "barrier": 1e-8,
    "weighted_mass": 1e-4,
    "laplacian": 1e-3,
    "initial_trace": 0.05,
}

SWEEP_AXES = {"gamma1": "point.1.gamma", "point.1.gamma": "point.1.gamma",
              "m": "model.m", "model.m": "model.m", "mu0": "model.mu0", "model.mu0": "model.mu0"}


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    x = float(v)
    if x != int(x):
        raise ValueError(f"{v} is not an integer")
    return int(x)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v} is not a boolean")


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _names(v: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _str(v: str) -> str:
    return v.strip()


def _M_list(v: str):
    s = v.strip().lower()
    return "auto" if s == "auto" else _floats(v)


_BOUNDARY_KEYS = {"kind": _str, "value": _float, "start": _float, "target": _float,
                  "T0": _float, "rate": _float, "times": _floats, "values": _floats,
                  "monotone_after": _float}

SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "model.n": (_int, 3),
    "model.m": (_float, None),
    "model.mu0": (_float, 1.0),
    "model.delta1": (_float, None),
    "model.cauchy_surrogate": (_bool, False),
    "domain.kind": (_str, "ball"),
    "domain.radius": (_float, 1.0),
    "domain.r_in": (_float, None),
    "domain.r_out": (_float, None),
    "domain.half_width": (_float, 1.0),
    "grid.nr": (_int, 200),
    "grid.r_min": (_float, None),
    "grid.grading": (_float, 1.05),
    "solver.dt0": (_float, 1e-6),
    "solver.growth": (_float, 1.1),
    "solver.dt_max": (_float, 0.05),
    "solver.dt_min": (_float, 1e-8),
    "solver.newton_tol": (_float, 1e-10),
    "solver.max_newton": (_int, 30),
    "solver.linear_tol": (_float, 1e-8),
    "limits.eps": (_floats, (1e-3,)),
    "limits.M": (_M_list, "auto"),
    "run.t_end": (_float, 1.0),
    "run.outputs": (_floats, None),
    "run.workers": (_int, 1),
    "probe.inner": (_float, None),
    "probe.outer": (_float, None),
    "diagnostics": (_names, ()),
    "barrier.delta3": (_float, None),
    "weight.b1": (_float, None),
    "weight.delta2": (_float, None),
    "weight.C2": (_float, 1.0),
    "trace.points": (_floats, None),
    "output.dir": (_str, "out"),
}
SCHEMA.update({f"boundary.{k}": (fn, None) for k, fn in _BOUNDARY_KEYS.items()})
SCHEMA.update({f"boundary.inner.{k}": (fn, None) for k, fn in _BOUNDARY_KEYS.items()})
SCHEMA.update({f"tol.{k}": (_float, v) for k, v in TOLERANCES.items()})
SCHEMA["boundary.kind"] = (_str, "constant")

_POINT_KEYS = {"a": _floats, "lambda": _float, "gamma": _float,
               "lambda_up": _float, "gamma_up": _float}
_POINT_RE = re.compile(r"^point\.(\d+)\.(\w+)$")


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    boundary: BoundaryProfile
    boundary_inner: BoundaryProfile | None
    nodes: int
    r_min: float | None
    grading: float
    solver: SolverConfig
    eps_list: tuple[float, ...]
    M_list: tuple[float, ...] | str
    t_end: float
    outputs: tuple[float, ...]
    workers: int
    probe_inner: float | None
    probe_outer: float | None
    diagnostics: tuple[str, ...]
    tol: dict
    barrier_delta3: float | None
    weight_b1: float | None
    weight_delta2: float | None
    weight_C2: float
    trace_points: tuple[float, ...] | None
    out_dir: str
    raw: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass
class RunReport:
    regime: RegimeReport
    rows: list = field(default_factory=list)   # (time, check, value, threshold, passed)
    metadata: dict = field(default_factory=dict)
    solver_error: str | None = None
    trajectory: Any = field(default=None, repr=False)
    probe: Any = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.solver_error is None and all(r[4] for r in self.rows)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=line)
        k, v = (s.strip() for s in line.split("=", 1))
        if k in pairs:
            raise ConfigError("duplicate key", key=k)
        pairs[k] = v
    return pairs


def _typed(pairs: dict[str, str]) -> tuple[dict, dict]:
    values: dict[str, Any] = {}
    points: dict[int, dict[str, Any]] = {}
    for k, v in pairs.items():
        mp = _POINT_RE.match(k)
        try:
            if mp:
                idx, attr = int(mp.group(1)), mp.group(2)
                if attr not in _POINT_KEYS:
                    raise ConfigError("unknown point attribute", key=k)
                points.setdefault(idx, {})[attr] = _POINT_KEYS[attr](v)
            elif k in SCHEMA:
                values[k] = SCHEMA[k][0](v)
            else:
                raise ConfigError("unknown key", key=k)
        except ValueError as exc:
            raise ConfigError(f"bad value {v!r}: {exc}", key=k) from exc
    for k, (_, default) in SCHEMA.items():
        values.setdefault(k, default)
    return values, points


def _boundary(values: dict, prefix: str, required: bool) -> BoundaryProfile | None:
    kind = values.get(f"{prefix}.kind")
    given = [k for k in _BOUNDARY_KEYS if values.get(f"{prefix}.{k}") is not None]
    if kind is None and not given:
        if required:
            raise ConfigError("boundary data required", key=f"{prefix}.kind")
        return None

    def need(name):
        v = values.get(f"{prefix}.{name}")
        if v is None:
            raise ConfigError(f"required for {prefix}.kind = {kind}", key=f"{prefix}.{name}")
        return v
    kind = kind or "constant"
    try:
        if kind == "constant":
            # the outer boundary defaults to f = mu0
            v = values.get(f"{prefix}.value")
            if v is None and prefix == "boundary":
                v = values["model.mu0"]
            return BoundaryProfile.constant(v if v is not None else need("value"))
        if kind == "decreasing":
            rate = values.get(f"{prefix}.rate") or 1.0
            return BoundaryProfile.decreasing_to(need("start"), need("target"), need("T0"), rate)
        if kind == "tabulated":
            return BoundaryProfile.tabulated(need("times"), need("values"),
                                             values.get(f"{prefix}.monotone_after"))
    except ParameterError as exc:
        raise ConfigError(str(exc), key=f"{prefix}.kind") from exc
    raise ConfigError(f"unknown boundary kind {kind!r}", key=f"{prefix}.kind")


def _domain(values: dict):
    kind = values["domain.kind"]
    try:
        if kind == "ball":
            return Ball(values["domain.radius"])
        if kind == "annulus":
            if values["domain.r_in"] is None or values["domain.r_out"] is None:
                raise ConfigError("annulus needs r_in and r_out", key="domain.r_in")
            return Annulus(values["domain.r_in"], values["domain.r_out"])
        if kind == "box":
            return Box(values["domain.half_width"])
    except ParameterError as exc:
        raise ConfigError(str(exc), key="domain.kind") from exc
    raise ConfigError(f"unknown domain kind {kind!r}", key="domain.kind")


def build_params(values: dict, points: dict, strict: bool = True) -> ModelParams:
    if values["model.m"] is None:
        raise ConfigError("exponent m is required", key="model.m")
    domain = _domain(values)
    n = values["model.n"]
    pts = []
    for idx in sorted(points):
        spec = points[idx]
        for req in ("lambda", "gamma"):
            if req not in spec:
                raise ConfigError("missing", key=f"point.{idx}.{req}")
        a = spec.get("a", (0.0,) * n)
        try:
            pts.append(SingularPoint(a, spec["lambda"], spec["gamma"],
                                     spec.get("lambda_up"), spec.get("gamma_up")))
        except ParameterError as exc:
            raise ConfigError(str(exc), key=f"point.{idx}") from exc
    delta1 = values["model.delta1"]
    try:
        if delta1 is None:
            probe = ModelParams(n, values["model.m"], (), values["model.mu0"], domain, 1e-300,
                                strict=False)
            d0 = compute_delta0(replace(probe, points=tuple(pts))) if pts else math.inf
            delta1 = 0.9 * d0 if math.isfinite(d0) else 0.1
        return ModelParams(n, values["model.m"], tuple(pts), values["model.mu0"], domain, delta1,
                           values["model.cauchy_surrogate"], strict=strict)
    except FDBlowupError as exc:
        msg = str(exc)
        key = ("model.m" if "0<m<(n-2)/n" in msg else "model.n" if "dimension" in msg
               else "model.delta1" if "delta" in msg else "point")
        raise ConfigError(str(exc), key=key) from exc


def config_from_values(values: dict, points: dict, raw: dict | None = None) -> RunConfig:
    params = build_params(values, points)
    bnd = _boundary(values, "boundary", required=True)
    inner = _boundary(values, "boundary.inner", required=False)
    if isinstance(params.domain, Annulus) and inner is None:
        raise ConfigError("annulus runs need inner boundary data", key="boundary.inner.kind")
    try:
        solver = SolverConfig(values["solver.dt0"], values["solver.growth"],
                              values["solver.dt_max"], values["solver.dt_min"],
                              values["solver.newton_tol"], values["solver.max_newton"],
                              values["solver.linear_tol"])
    except ParameterError as exc:
        raise ConfigError(str(exc), key="solver") from exc
    eps, Ms = values["limits.eps"], values["limits.M"]
    try:
        LimitSchedule(eps, (1.0,) if Ms == "auto" else Ms)
    except ParameterError as exc:
        raise ConfigError(str(exc), key="limits") from exc
    t_end = values["run.t_end"]
    if not t_end > 0:
        raise ConfigError("must be positive", key="run.t_end")
    outputs = values["run.outputs"] or tuple(np.linspace(0, t_end, 11)[1:])
    if any(not 0 < t <= t_end for t in outputs):
        raise ConfigError("output times must lie in (0, t_end]", key="run.outputs")
    diags = values["diagnostics"]
    for d in diags:
        if d not in DIAGNOSTICS:
            raise ConfigError(f"unknown diagnostic {d!r}", key="diagnostics")
    if len(set(diags)) != len(diags):
        raise ConfigError("diagnostic listed twice", key="diagnostics")
    if "double_limit" in diags and (len(eps) < 2 or Ms == "auto" or len(Ms) < 2):
        raise ConfigError("double_limit needs two or more eps and M values", key="limits")
    if "aronson_benilan" in diags and bnd.monotone_after is None and not params.cauchy_surrogate:
        raise ConfigError("boundary data is not declared monotone", key="boundary.monotone_after")
    if inner is not None and "aronson_benilan" in diags and inner.monotone_after is None:
        raise ConfigError("inner boundary data is not declared monotone",
                          key="boundary.inner.monotone_after")
    if params.domain.mode == "box" and values["grid.nr"] > 41:
        raise ConfigError("box grids above 41 nodes per direction are too large", key="grid.nr")
    tol = {k: values[f"tol.{k}"] for k in TOLERANCES}
    return RunConfig(params, bnd, inner, values["grid.nr"], values["grid.r_min"],
                     values["grid.grading"], solver, eps, Ms, t_end, tuple(sorted(outputs)),
                     values["run.workers"], values["probe.inner"], values["probe.outer"], diags,
                     tol, values["barrier.delta3"], values["weight.b1"], values["weight.delta2"],
                     values["weight.C2"], values["trace.points"], values["output.dir"],
                     raw or {})


def parse_config(text: str) -> RunConfig:
    pairs = read_pairs(text)
    values, points = _typed(pairs)
    return config_from_values(values, points, pairs)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _g_limit(cfg: RunConfig):
    """Boundary limit values in the grid's Dirichlet order."""
    outer = cfg.boundary.limit()
    if cfg.boundary_inner is not None:
        return [cfg.boundary_inner.limit(), outer]
    return outer


def run_experiment(cfg: RunConfig, out_dir: str | Path | None = None) -> RunReport:
    """Run the (eps, M) schedule, apply the requested checks and write outputs."""
    t_start = time.perf_counter()
    params = cfg.params
    report = RunReport(classify_regime(params, cfg.boundary, _g_limit(cfg)))
    grid = make_grid(params.domain, params.n, cfg.nodes, cfg.r_min, cfg.grading)
    u0 = build_u0(params)
    Ms = cfg.M_list
    if Ms == "auto":
        # largest finite nodal value of u0, so truncation only caps snapped points
        vals = u0(grid.r if grid.kind == "radial" else grid.coords)
        Ms = (float(np.max(vals[np.isfinite(vals)])),)
    probe = probe_mask(grid, params, cfg.probe_inner, cfg.probe_outer)
    eps_l = cfg.eps_list
    trajs: dict = {}
    dl = None
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if len(eps_l) >= 2 and len(Ms) >= 2:
            dl = double_limit_run(params, LimitSchedule(eps_l, Ms), cfg.boundary, cfg.t_end,
                                  cfg.solver, grid, cfg.outputs, probe, cfg.boundary_inner,
                                  cfg.tol["mono_rel"], cfg.workers)
            trajs = dl.runs
        else:
            for M in Ms:
                for e in eps_l:
                    trajs[(e, M)] = run_regularized(params, e, M, cfg.boundary, cfg.t_end,
                                                    cfg.solver, grid, cfg.outputs,
                                                    cfg.boundary_inner)
    except SolverError as exc:
        report.solver_error = str(exc)
        report.metadata["wall_time_s"] = time.perf_counter() - t_start
        write_outputs(out, cfg, report, None)
        return report
    key = (eps_l[-1], Ms[-1])
    traj = trajs[key]
    report.trajectory, report.probe = traj, probe
    report.metadata.update(
        wall_time_s=None, steps=int(traj.step_times.size),
        mean_newton=float(np.mean(traj.newton_iterations)) if traj.newton_iterations.size else 0.0,
        max_newton_residual=float(np.max(traj.newton_residuals)) if traj.newton_residuals.size else 0.0,
        eps=key[0], M=key[1], nodes=grid.size)
    _apply_diagnostics(cfg, report, grid, probe, trajs, traj, key, dl)
    report.metadata["wall_time_s"] = time.perf_counter() - t_start
    write_outputs(out, cfg, report, traj)
    return report


def _apply_diagnostics(cfg, report, grid, probe, trajs, traj, key, dl):
    params, tol = cfg.params, cfg.tol
    t_end = float(traj.times[-1])
    rows = report.rows
    center = params.points[0].a if params.points else None
    m, mu0 = params.m, params.mu0

    def target():
        if params.cauchy_surrogate or cfg.boundary.limit() is None:
            return params.mu0 + key[0]
        g = _g_limit(cfg)
        g = np.asarray(g, dtype=float) + key[0]
        return harmonic_limit(g, m, grid)

    for name in cfg.diagnostics:
        if name == "truncation_bounds":
            sups = [cfg.boundary.sup() or 0.0]
            if cfg.boundary_inner is not None:
                sups.append(cfg.boundary_inner.sup() or 0.0)
            worst = 0.0
            for (e, M), tr in trajs.items():
                worst = max(worst, truncation_bounds(tr, e, max([M] + sups)).value)
            rows.append((t_end, name, worst, tol["bounds"], worst <= tol["bounds"]))
        elif name == "double_limit":
            v = max(dl.eps_violation, dl.M_violation)
            rows.append((t_end, name, v, dl.tolerance, dl.passed))
        elif name == "convergence":
            tg = target()
            seq = convergence_monitor(traj, tg, probe)
            tv = tg.values[probe] if hasattr(tg, "values") else np.array([tg])
            thr = tol["convergence"] * float(np.min(tv))
            rows.append((t_end, name, float(seq[-1]), thr, bool(seq[-1] <= thr)))
        elif name == "blowup":
            seq = blowup_monitor(traj, probe)
            thr = tol["blowup_factor"] * mu0
            ok = strictly_increasing(seq[1:]) and seq[-1] >= thr
            rows.append((t_end, name, float(seq[-1]), thr, bool(ok)))
        elif name == "aronson_benilan":
            T0 = 0.0 if params.cauchy_surrogate else cfg.boundary.monotone_after
            if cfg.boundary_inner is not None:
                T0 = max(T0, cfg.boundary_inner.monotone_after)
            worst = max(check_aronson_benilan(tr, T0, m, tol["aronson_benilan"]).value
                        for tr in trajs.values())
            rows.append((t_end, name, worst, tol["aronson_benilan"],
                         worst <= tol["aronson_benilan"]))
        elif name == "exponent_fit":
            if not params.points:
                raise ConfigError("exponent_fit needs a singular point", key="diagnostics")
            gam = params.points[0].gamma
            win = default_window(grid, params.delta1)
            sel = [k for k, t in enumerate(traj.times) if 0 < t <= min(1.0, t_end)]
            dev = max(abs(fit_blowup_exponent(traj.field(k), center, win).gamma_hat - gam)
                      for k in sel)
            rows.append((float(traj.times[sel[-1]]), name, dev, tol["exponent"],
                         dev <= tol["exponent"]))
        elif name == "removable":
            if not params.points:
                raise ConfigError("removable needs a singular point", key="diagnostics")
            k = removability_exponent(traj.field(len(traj) - 1), m, center,
                                      default_window(grid, params.delta1))
            rows.append((t_end, name, k, params.n - 2.0, bool(k < params.n - 2)))
        elif name == "barrier":
            if not params.points:
                raise ConfigError("barrier needs a singular point", key="diagnostics")
            d3 = cfg.barrier_delta3 or min(params.delta1, 0.99 * compute_delta0(params), 0.99)
            v = verify_barrier(traj, barrier_for(params, d3))
            rows.append((t_end, name, v, tol["barrier"], v <= tol["barrier"]))
        elif name == "weighted_mass":
            if not params.points:
                raise ConfigError("weighted_mass needs a singular point", key="diagnostics")
            p = params.points[0]
            b1 = cfg.weight_b1 or 2 / (1 - m) + 0.5
            d2 = cfg.weight_delta2 or params.delta1 / 2
            try:
                w = WeightPsi(params.n, m, max(params.n - p.gamma, 0.0), b1, params.delta1, d2,
                              p.a)
            except ParameterError as exc:
                raise ConfigError(str(exc), key="weight") from exc
            res = weighted_mass_check(traj, w, C_psi(w), tol["weighted_mass"])
            M0 = M0_of(cfg.t_end, cfg.weight_C2, params, w)
            report.metadata["M0"] = M0
            report.metadata["M_at_least_M0"] = key[1] >= M0
            rows.append((t_end, name, res.margin, -res.tolerance, res.passed))
        elif name == "laplacian_probe":
            v = laplacian_probe_residual(traj.field(len(traj) - 1), m, probe)
            rows.append((t_end, name, v, tol["laplacian"], v <= tol["laplacian"]))
        elif name == "initial_trace":
            pts = cfg.trace_points
            if pts is None:
                # the probe node farthest from the singular point, clear of the jump at delta1
                d = grid.distance(center if center is not None else np.zeros(params.n))
                far = int(np.flatnonzero(probe)[np.argmax(d[probe])])
                pts = (float(grid.r[far]),) if grid.kind == "radial" else tuple(grid.coords[far])
            res = initial_trace_check(traj, build_u0(params), pts, params)
            rows.append((res.time, name, res.max_rel, tol["initial_trace"],
                         res.max_rel <= tol["initial_trace"]))
        elif name == "gradient_scaling":
            if not params.points:
                raise ConfigError("gradient_scaling needs a singular point", key="diagnostics")
            v = gradient_scaling_check(traj.field(len(traj) - 1), center,
                                       params.points[0].gamma,
                                       default_window(grid, params.delta1), m)
            rows.append((t_end, name, v, math.inf, bool(np.isfinite(v))))
        elif name == "regime_agreement":
            emp = empirical_regime(traj, params, probe, target() if params.points else None)
            ok = emp.regime == report.regime.regime
            report.metadata["empirical_regime"] = emp.regime
            rows.append((t_end, name, emp.removability_exponent, params.n - 2.0, bool(ok)))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_outputs(out: Path, cfg: RunConfig, report: RunReport, traj) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if traj is not None:
        with open(out / "snapshots.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            grid = traj.grid
            if grid.kind == "radial":
                w.writerow(["t", "r", "u"])
                for t, u in zip(traj.times, traj.values):
                    for r, v in zip(grid.r, u):
                        w.writerow([_fmt(t), _fmt(r), _fmt(v)])
            else:
                w.writerow(["t", "x", "y", "z", "u"])
                C = grid.coords
                for t, u in zip(traj.times, traj.values):
                    for c, v in zip(C, u):
                        w.writerow([_fmt(t), _fmt(c[0]), _fmt(c[1]), _fmt(c[2]), _fmt(v)])
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "check", "value", "threshold", "pass"])
        for row in report.rows:
            w.writerow([_fmt(x) for x in row])
    lines = [f"regime: {report.regime}"]
    if report.regime.also_applies:
        lines.append("also applies: " + ", ".join(report.regime.also_applies))
    th = report.regime.thresholds
    if th is not None:
        lines.append("thresholds: " + ", ".join(f"{k}={_fmt(v)}" for k, v in th._asdict().items()))
    if report.solver_error:
        lines.append(f"SOLVER ERROR (partial outputs): {report.solver_error}")
    for t, name, v, thr, ok in report.rows:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: value={_fmt(v)} threshold={_fmt(thr)}"
                     f" at t={_fmt(t)}")
    # wall time is left out so that reruns give identical files
    for k, v in sorted(report.metadata.items()):
        if k != "wall_time_s":
            lines.append(f"{k}: {_fmt(v)}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SWEEP_HEADER = ["value", "regime", "theorem_tag", "failed_hypothesis", "empirical_regime",
                "agree", "probe_inf_end", "probe_dev_end", "removability_exponent", "passed"]


def _sweep_row(pairs: dict, key: str, value: float, out: Path) -> list:
    p2 = dict(pairs)
    p2[key] = repr(float(value))
    values, points = _typed(p2)
    try:
        cfg = config_from_values(values, points, p2)
    except ConfigError as exc:
        # hypothesis violations become rows; classify what can still be built
        try:
            params = build_params(values, points, strict=False)
            rep = classify_regime(params, _boundary(values, "boundary", True))
            reason = rep.failed_hypothesis if rep.regime == OUTSIDE else str(exc)
        except ConfigError:
            reason = str(exc)
        return [value, OUTSIDE, "none", reason, "", "", "", "", "", "false"]
    regime = classify_regime(cfg.params, cfg.boundary, _g_limit(cfg))
    if regime.regime == OUTSIDE:
        return [value, OUTSIDE, "none", regime.failed_hypothesis, "", "", "", "", "", "false"]
    diags = tuple(dict.fromkeys(cfg.diagnostics + ("regime_agreement",)))
    cfg = replace(cfg, diagnostics=diags)
    rep = run_experiment(cfg, out / f"{key}={_fmt(float(value))}")
    if rep.solver_error:
        return [value, regime.regime, regime.theorem_tag, "", "SolverError", "false",
                "", "", "", "false"]
    last = rep.trajectory.values[-1][rep.probe]
    row_ag = next(r for r in rep.rows if r[1] == "regime_agreement")
    return [value, regime.regime, regime.theorem_tag, "", rep.metadata.get("empirical_regime"),
            row_ag[4], float(np.min(last)), float(np.max(np.abs(last - cfg.params.mu0))),
            row_ag[2], rep.passed]


def sweep(text: str, axis: str, values: list[float], out_dir: str | Path) -> list[list]:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {sorted(set(SWEEP_AXES))}", key=axis)
    key = SWEEP_AXES[axis]
    pairs = read_pairs(text)
    if key.startswith("point.") and "point.1.lambda" not in pairs:
        raise ConfigError("sweeping gamma1 needs point 1 in the template", key="point.1")
    _typed(pairs)   # reject unknown keys before running anything
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = int(float(pairs.get("run.workers", "1")))
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as ex:
        rows = list(ex.map(lambda v: _sweep_row(pairs, key, v, out), values))
    with open(out / "regime_map.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return rows


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdblowup", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("config")
    r.add_argument("--out")
    s = sub.add_parser("sweep", help="sweep one scalar and write regime_map.csv")
    s.add_argument("config")
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma separated list (may be empty)")
    s.add_argument("--out")
    c = sub.add_parser("check", help="validate a configuration")
    c.add_argument("config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.cmd == "check":
            cfg = parse_config(text)
            print(f"ok: {classify_regime(cfg.params, cfg.boundary, _g_limit(cfg))}")
            return EXIT_OK
        if args.cmd == "run":
            cfg = parse_config(text)
            report = run_experiment(cfg, args.out)
            print((Path(args.out or cfg.out_dir) / "report.txt").read_text(), end="")
            if report.solver_error:
                return EXIT_SOLVER
            return EXIT_OK if report.passed else EXIT_CHECKS
        vals = [float(v) for v in args.values.split(",") if v.strip()]
        out = args.out or read_pairs(text).get("output.dir", "out")
        rows = sweep(text, args.axis, vals, out)
        for row in rows:
            print(",".join(_fmt(x) for x in row))
        if any(r[4] == "SolverError" for r in rows):
            return EXIT_SOLVER
        return EXIT_OK if all(r[5] in (True, "") for r in rows) else EXIT_CHECKS
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
