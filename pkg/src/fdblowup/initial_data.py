"""Singular initial profiles and the truncate / lift operators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundaryProfile, Field, Grid, ModelParams
from .errors import DiscretizationError, ParameterError


def _as_points(x, params: ModelParams) -> np.ndarray:
    """Coordinates with trailing axis of length n (radial mode accepts radii)."""
    x = np.asarray(x, dtype=float)
    if params.domain.mode == "radial" and (x.ndim <= 1 or x.shape[-1] not in (1, params.n)):
        x = x[..., None]
    return x


@dataclass(frozen=True)
class InitialProfile:
    """u0(x) = max(mu0, max_i lam_i |x-a_i|^-gamma_i [|x-a_i| < delta1]).

    In radial mode the evaluator also accepts plain radii.
    """
    params: ModelParams

    def distances(self, x) -> list[np.ndarray]:
        x = _as_points(x, self.params)
        out = []
        for p in self.params.points:
            if x.shape[-1] == 1:
                out.append(np.abs(x[..., 0]))
            else:
                out.append(np.linalg.norm(x - np.asarray(p.a), axis=-1))
        return out

    def __call__(self, x) -> np.ndarray:
        x = _as_points(x, self.params)
        u = np.full(x.shape[:-1], float(self.params.mu0))
        d1 = self.params.delta1
        with np.errstate(divide="ignore"):
            for p, r in zip(self.params.points, self.distances(x)):
                bump = np.where(r < d1, p.lam * r ** (-p.gamma), 0.0)
                u = np.maximum(u, bump)
        return u

    @property
    def sup(self) -> float:
        return np.inf if self.params.points else float(self.params.mu0)


@dataclass(frozen=True)
class Truncated:
    base: object
    M: float

    def __call__(self, x):
        return np.minimum(self.base(x), self.M)

    @property
    def sup(self) -> float:
        return min(self.M, getattr(self.base, "sup", np.inf))


@dataclass(frozen=True)
class Lifted:
    base: object
    eps: float

    def __call__(self, x):
        return self.base(x) + self.eps

    @property
    def sup(self) -> float:
        return getattr(self.base, "sup", np.inf) + self.eps


@dataclass(frozen=True)
class ConstantProfile:
    value: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape if x.ndim <= 1 else x.shape[:-1]
        return np.full(shape, float(self.value))

    @property
    def sup(self) -> float:
        return float(self.value)


def build_u0(params: ModelParams) -> InitialProfile:
    return InitialProfile(params)


def truncate(u0, M: float) -> Truncated:
    if not M > 0:
        raise ParameterError(f"truncation level M must be positive, got {M}")
    return Truncated(u0, float(M))


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise ParameterError(f"lift eps must lie in (0,1), got {eps}")


def lift(profile, eps: float) -> Lifted:
    _check_eps(eps)
    return Lifted(profile, float(eps))


def lift_boundary(f: BoundaryProfile, eps: float) -> BoundaryProfile:
    _check_eps(eps)
    return f.lifted(eps)


def regularize(u0, M: float, eps: float) -> Lifted:
    """min(u0, M) + eps, the approximating initial datum (truncate first, then lift)."""
    return lift(truncate(u0, M), eps)


def sample_to_grid(profile, grid: Grid, time: float = 0.0) -> Field:
    if grid.kind == "radial":
        vals = profile(grid.r)
    else:
        vals = profile(grid.coords)
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DiscretizationError("profile is not finite at every grid node; truncate first")
    if np.any(vals <= 0):
        raise DiscretizationError("sampled profile must be strictly positive")
    return Field(grid, vals, time)
