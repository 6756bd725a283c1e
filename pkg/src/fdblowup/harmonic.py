"""Discrete harmonic functions and the predicted large-time profile phi^{1/m}."""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .core import Field, Grid
from .errors import DiagnosticError, ParameterError, SolverError


def _boundary_vector(grid: Grid, boundary_values) -> np.ndarray:
    """Dirichlet values in the order of ``grid.dirichlet``.

    Accepts a scalar, one value per Dirichlet node, a pair (inner, outer) on a
    radial annulus, or a callable of the node coordinates (radii in radial mode).
    """
    D = grid.dirichlet
    if callable(boundary_values):
        pts = grid.r[D] if grid.kind == "radial" else grid.coords[D]
        vals = np.asarray(boundary_values(pts), dtype=float)
    else:
        vals = np.asarray(boundary_values, dtype=float)
    if vals.ndim == 0:
        vals = np.full(D.size, float(vals))
    if vals.shape != (D.size,):
        raise ParameterError(f"expected {D.size} boundary values, got shape {vals.shape}")
    return vals


def solve_laplace(grid: Grid, boundary_values) -> Field:
    """Discrete harmonic field with the given Dirichlet data.

    Uses the same conservative stencil as the time stepper, so stepper steady
    states and these solutions agree to rounding.
    """
    vals = _boundary_vector(grid, boundary_values)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ParameterError("boundary values must be positive and finite")
    D, U = grid.dirichlet, grid.unknowns
    phi = np.zeros(grid.size)
    phi[D] = vals
    K = grid.stiffness().tocsr()
    rhs = -(K[U][:, D] @ vals)
    K_UU = K[U][:, U]
    if grid.kind == "radial":
        main = K_UU.diagonal()
        ab = np.zeros((3, U.size))
        ab[1] = -main
        ab[0, 1:] = -K_UU.diagonal(1)
        ab[2, :-1] = -K_UU.diagonal(-1)
        try:
            phi[U] = scipy.linalg.solve_banded((1, 1), ab, -rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Laplace solve failed: {exc}") from exc
    else:
        phi[U] = spla.spsolve(K_UU.tocsc(), rhs)
    if not np.all(np.isfinite(phi)):
        raise SolverError("Laplace solve produced non-finite values")
    lo, hi = vals.min(), vals.max()
    slack = 1e-12 * max(abs(lo), abs(hi))
    if phi.min() < lo - slack or phi.max() > hi + slack:
        raise SolverError("discrete maximum principle violated", float(
            max(lo - phi.min(), phi.max() - hi)))
    return Field(grid, phi)


def harmonic_limit(g, m: float, grid: Grid) -> Field:
    """(solve_laplace(grid, g^m))^{1/m}, the predicted t -> infinity profile."""
    vals = _boundary_vector(grid, g)
    if np.any(vals <= 0):
        raise ParameterError("boundary limit g must be positive")
    phi = solve_laplace(grid, vals ** m)
    return Field(grid, phi.values ** (1 / m), phi.time)


def fit_power_law(r: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Least-squares fit log v = c - k log r; returns (k, rms residual)."""
    A = np.column_stack([np.ones_like(r), -np.log(r)])
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    res = np.log(v) - A @ coef
    return float(coef[1]), float(np.sqrt(np.mean(res ** 2)))


def default_window(grid: Grid, delta1: float | None = None) -> tuple[float, float]:
    """[2 r_min, delta1/4]; the box analogue starts at two grid spacings."""
    if grid.kind == "radial":
        lo = 2 * grid.r[0]
        hi = (delta1 if delta1 is not None else grid.r[-1] / 4) / 4
    else:
        lo = 2 * grid.h
        hi = (delta1 if delta1 is not None else grid.x[-1] / 2) / 4 + 2 * grid.h
    return lo, hi


def window_nodes(grid: Grid, center, window: tuple[float, float], min_nodes: int = 6):
    d = grid.distance(center)
    sel = (d >= window[0]) & (d <= window[1]) & (d > 0)
    if grid.kind == "box":
        sel[grid.dirichlet] = False
    if sel.sum() < min_nodes:
        raise DiagnosticError(
            f"window [{window[0]:.4g}, {window[1]:.4g}] holds {int(sel.sum())} nodes, "
            f"need {min_nodes}")
    return sel, d


def removability_exponent(field: Field, m: float, center=None,
                          window: tuple[float, float] | None = None) -> float:
    """Fitted growth exponent of u^m near ``center``."""
    grid = field.grid
    center = np.zeros(grid.n) if center is None else center
    window = window or default_window(grid)
    sel, d = window_nodes(grid, center, window)
    k, _ = fit_power_law(d[sel], field.values[sel] ** m)
    return k


def removable_singularity_check(field: Field, center=None, gamma_up: float | None = None,
                                m: float = 0.2,
                                window: tuple[float, float] | None = None) -> bool:
    """True iff u^m grows more slowly than r^{2-n} near ``center``.

    The exponent is fitted on ``window``.  When ``gamma_up`` is supplied the
    declared envelope exponent must satisfy m gamma' < n - 2 as well.
    """
    n = field.grid.n
    k = removability_exponent(field, m, center, window)
    ok = k < n - 2
    if gamma_up is not None:
        ok = ok and m * gamma_up < n - 2
    return bool(ok)


def radial_harmonic(n: int, r1: float, r2: float, v1: float, v2: float) -> Callable:
    """A + B r^{2-n} through (r1, v1) and (r2, v2)."""
    B = (v1 - v2) / (r1 ** (2 - n) - r2 ** (2 - n))
    A = v1 - B * r1 ** (2 - n)
    return lambda r: A + B * np.asarray(r, dtype=float) ** (2 - n)


__all__ = [
    "solve_laplace", "harmonic_limit", "removable_singularity_check", "removability_exponent",
    "fit_power_law", "default_window", "window_nodes", "radial_harmonic",
]
