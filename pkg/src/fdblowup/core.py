"""Parameters, domains, grids, boundary data and the regime classifier.

Everything in this module is immutable once built.  Arrays stored on frozen
dataclasses are flagged read-only so that trajectories and grids can be shared
between concurrent solves.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DiscretizationError, DomainError, ParameterError

DEFAULT_RMIN_FRACTION = 1e-3
DEFAULT_GRADING = 1.05
MIN_NODES = 8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


# ---------------------------------------------------------------------------
# critical exponents
# ---------------------------------------------------------------------------

class CriticalExponents(NamedTuple):
    p_c: float      # 2/(1-m): persistence of a point singularity
    q_mix: float    # n/(m+1)
    q_dim: float    # n
    p_harm: float   # (n-2)/m: harmonic limit vs. blow-up everywhere


def check_exponent_range(n: int, m: float) -> None:
    if int(n) != n or n < 3:
        raise ParameterError(f"dimension n must be an integer >= 3, got {n}")
    if not (0.0 < m < (n - 2) / n):
        raise ParameterError(
            f"exponent m={m} violates 0<m<(n-2)/n={(n - 2) / n:.6g}")


def critical_exponents(n: int, m: float) -> CriticalExponents:
    check_exponent_range(n, m)
    return CriticalExponents(2.0 / (1.0 - m), n / (m + 1.0), float(n), (n - 2) / m)


# ---------------------------------------------------------------------------
# domains and singular points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError("ball radius must be positive")

    mode = "radial"


@dataclass(frozen=True)
class Annulus:
    """Radial shell r_in < |x| < r_out; the singular point (origin) sits in the hole."""
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0 < self.r_in < self.r_out):
            raise ParameterError("annulus needs 0 < r_in < r_out")

    mode = "radial"


@dataclass(frozen=True)
class Box:
    """Cube [-half_width, half_width]^3, full-grid mode (n = 3 only)."""
    half_width: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError("box half width must be positive")

    mode = "box"


DomainSpec = Ball | Annulus | Box


def boundary_distance(domain: DomainSpec, a: np.ndarray) -> float:
    """Distance from a to the boundary; negative or zero outside/on it."""
    a = np.asarray(a, dtype=float)
    if isinstance(domain, Ball):
        return domain.radius - float(np.linalg.norm(a))
    if isinstance(domain, Annulus):
        # the inner sphere is an artificial cut around the singular core
        return domain.r_out - float(np.linalg.norm(a))
    return float(np.min(domain.half_width - np.abs(a)))


@dataclass(frozen=True)
class SingularPoint:
    a: tuple[float, ...]
    lam: float
    gamma: float
    lam_up: float | None = None
    gamma_up: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(c) for c in self.a))
        if not self.lam > 0:
            raise ParameterError("lambda must be positive")
        if self.lam_up is not None and not self.lam_up > 0:
            raise ParameterError("lambda' must be positive")
        if self.gamma_up is not None and self.gamma_up < self.gamma:
            raise ParameterError(
                f"need gamma <= gamma' (got {self.gamma} > {self.gamma_up})")

    @property
    def upper_gamma(self) -> float:
        return self.gamma if self.gamma_up is None else self.gamma_up


@dataclass(frozen=True)
class ModelParams:
    n: int
    m: float
    points: tuple[SingularPoint, ...]
    mu0: float
    domain: DomainSpec
    delta1: float
    cauchy_surrogate: bool = False
    # strict=False admits gamma <= 2/(1-m) so that the classifier can report
    # the failed hypothesis; such params are rejected by the solver drivers
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        exps = critical_exponents(self.n, self.m)
        if self.mu0 < 0:
            raise ParameterError("mu0 must be >= 0")
        for k, p in enumerate(self.points, start=1):
            if len(p.a) != self.n and self.domain.mode == "box":
                raise ParameterError(f"point {k}: expected {self.n} coordinates")
            if p.gamma <= exps.p_c and self.strict:
                raise ParameterError(
                    f"point {k}: gamma={p.gamma} must exceed 2/(1-m)={exps.p_c:.6g}")
        if self.domain.mode == "radial":
            if len(self.points) > 1:
                raise ParameterError("radial mode supports a single singular point")
            if self.points and np.linalg.norm(self.points[0].a) != 0.0:
                raise ParameterError("radial mode needs the singular point at the origin")
        elif self.n != 3:
            raise ParameterError("box mode is implemented for n = 3 only")
        d0 = compute_delta0(self)
        if not (0 < self.delta1 < d0):
            raise ParameterError(f"need 0 < delta1 < delta0 = {d0:.6g}, got {self.delta1}")

    @property
    def exponents(self) -> CriticalExponents:
        return critical_exponents(self.n, self.m)

    def upper_lambda(self, point: SingularPoint, radius: float | None = None) -> float:
        """Smallest lambda' with max(mu0, lam r^-gamma) <= lambda' r^-gamma' for r < radius."""
        r = self.delta1 if radius is None else radius
        if point.lam_up is not None:
            return point.lam_up
        g, gu = point.gamma, point.upper_gamma
        return max(point.lam * r ** (gu - g), self.mu0 * r ** gu)

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


def compute_delta0(params: ModelParams) -> float:
    """One third of the smallest boundary distance / pairwise separation."""
    pts = [np.asarray(p.a, dtype=float) for p in params.points]
    if not pts:
        return math.inf
    cands = []
    for a in pts:
        d = boundary_distance(params.domain, a)
        if d <= 0:
            raise DomainError(f"singular point {tuple(a)} is not interior to the domain")
        cands.append(d)
    for a, b in itertools.combinations(pts, 2):
        d = float(np.linalg.norm(a - b))
        if d == 0.0:
            raise DomainError("singular points must be pairwise distinct")
        cands.append(d)
    return min(cands) / 3.0


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Graded radial nodes with conservative finite-volume weights.

    ``cond[i]`` is the exact conductance of the shell between nodes i and i+1,
    1/int r^{1-n} dr, so that r^{2-n} and constants are discrete harmonic.
    ``vol[i]`` is the dual-cell volume per unit solid angle.
    """
    r: np.ndarray
    n: int
    inner: str  # "symmetry" (ball) or "dirichlet" (annulus)
    cond: np.ndarray = field(init=False)
    vol: np.ndarray = field(init=False)

    kind = "radial"

    def __post_init__(self):
        r = _frozen(self.r)
        if r.size < MIN_NODES:
            raise DiscretizationError(f"need at least {MIN_NODES} radial nodes")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise DiscretizationError("radial nodes must be positive and increasing")
        n = self.n
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "cond", _frozen(
            (n - 2) / (r[:-1] ** (2 - n) - r[1:] ** (2 - n))))
        mid = 0.5 * (r[:-1] + r[1:])
        lo = np.concatenate([[0.0 if self.inner == "symmetry" else r[0]], mid])
        hi = np.concatenate([mid, [r[-1]]])
        object.__setattr__(self, "vol", _frozen((hi ** n - lo ** n) / n))

    @property
    def size(self) -> int:
        return self.r.size

    @property
    def dirichlet(self) -> np.ndarray:
        return np.array([0, self.size - 1]) if self.inner == "dirichlet" else np.array([self.size - 1])

    @property
    def unknowns(self) -> np.ndarray:
        lo = 1 if self.inner == "dirichlet" else 0
        return np.arange(lo, self.size - 1)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights (true volumes) for integrals over the domain."""
        return sphere_area(self.n) * self.vol

    def distance(self, center=None) -> np.ndarray:
        return self.r

    def flux_divergence(self, w: np.ndarray) -> np.ndarray:
        """sum of conductance-weighted differences at every node (zero-flux ends)."""
        flux = self.cond * np.diff(w)
        out = np.zeros_like(w)
        out[:-1] += flux
        out[1:] -= flux
        return out

    def laplacian(self, w: np.ndarray) -> np.ndarray:
        return self.flux_divergence(w) / self.vol

    def stiffness(self) -> sp.csr_matrix:
        c = self.cond
        main = np.zeros(self.size)
        main[:-1] -= c
        main[1:] -= c
        return sp.diags([c, main, c], [-1, 0, 1], format="csr")

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return np.gradient(u, self.r)


@dataclass(frozen=True, eq=False)
class BoxGrid:
    """Uniform tensor grid on [-L, L]^3 with the 7-point stencil."""
    x: np.ndarray
    n: int = 3

    kind = "box"

    def __post_init__(self):
        x = _frozen(self.x)
        if x.size < MIN_NODES:
            raise DiscretizationError(f"need at least {MIN_NODES} nodes per direction")
        object.__setattr__(self, "x", x)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def shape(self) -> tuple[int, int, int]:
        k = self.x.size
        return (k, k, k)

    @property
    def size(self) -> int:
        return self.x.size ** 3

    @property
    def coords(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(self.x, self.x, self.x, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def _boundary_mask(self) -> np.ndarray:
        k = self.x.size
        idx = np.arange(k)
        edge = (idx == 0) | (idx == k - 1)
        I, J, K = np.meshgrid(edge, edge, edge, indexing="ij")
        return (I | J | K).ravel()

    @property
    def dirichlet(self) -> np.ndarray:
        return np.flatnonzero(self._boundary_mask())

    @property
    def unknowns(self) -> np.ndarray:
        return np.flatnonzero(~self._boundary_mask())

    @property
    def vol(self) -> np.ndarray:
        return np.full(self.size, self.h ** 3)

    @property
    def weights(self) -> np.ndarray:
        k = self.x.size
        w1 = np.full(k, self.h)
        w1[[0, -1]] *= 0.5
        return np.einsum("i,j,k->ijk", w1, w1, w1).ravel()

    def distance(self, center) -> np.ndarray:
        return np.linalg.norm(self.coords - np.asarray(center, dtype=float), axis=1)

    def stiffness(self) -> sp.csr_matrix:
        k = self.x.size
        one = sp.diags([np.ones(k - 1), -2 * np.ones(k), np.ones(k - 1)], [-1, 0, 1])
        eye = sp.identity(k)
        lap = (sp.kron(sp.kron(one, eye), eye) + sp.kron(sp.kron(eye, one), eye)
               + sp.kron(sp.kron(eye, eye), one))
        # conductance h = h^3 / h^2 so that K w / vol is the 7-point Laplacian
        return (self.h * lap).tocsr()

    def flux_divergence(self, w: np.ndarray) -> np.ndarray:
        out = self.stiffness() @ w
        out[self.dirichlet] = 0.0
        return out

    def laplacian(self, w: np.ndarray) -> np.ndarray:
        return self.flux_divergence(w) / self.vol

    def gradient(self, u: np.ndarray) -> np.ndarray:
        g = np.gradient(u.reshape(self.shape), self.h)
        return np.sqrt(sum(gi ** 2 for gi in g)).ravel()


Grid = RadialGrid | BoxGrid


def make_grid(domain: DomainSpec, n: int, nodes: int | None = None,
              r_min: float | None = None, grading: float = DEFAULT_GRADING) -> Grid:
    """Build the grid for a domain.

    Radial grids are geometric (constant ratio between consecutive radii).
    ``nodes`` fixes the node count, otherwise it follows from ``grading``.
    """
    if isinstance(domain, Box):
        k = nodes or 17
        return BoxGrid(np.linspace(-domain.half_width, domain.half_width, k), n)
    if isinstance(domain, Ball):
        lo, hi, inner = (r_min or DEFAULT_RMIN_FRACTION * domain.radius), domain.radius, "symmetry"
    else:
        lo, hi, inner = domain.r_in, domain.r_out, "dirichlet"
    if not (0 < lo < hi):
        raise DiscretizationError("need 0 < r_min < R")
    if nodes is None:
        nodes = int(math.ceil(math.log(hi / lo) / math.log(grading))) + 1
    return RadialGrid(np.geomspace(lo, hi, max(nodes, 2)), n, inner)


# ---------------------------------------------------------------------------
# fields and trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.size,):
            raise DiscretizationError(
                f"field has {v.shape} values for a grid of {self.grid.size} nodes")
        object.__setattr__(self, "values", v)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.values > 0))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots u(t_k) on one grid plus per-step Newton metadata."""
    grid: Grid
    times: np.ndarray
    values: np.ndarray
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    newton_iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    newton_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape != (t.size, self.grid.size):
            raise DiscretizationError("snapshot array does not match times x nodes")
        if np.any(np.diff(t) <= 0):
            raise DiscretizationError("snapshot times must be strictly increasing")
        for name in ("step_times", "newton_residuals"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        it = np.asarray(self.newton_iterations, dtype=int)
        it.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "newton_iterations", it)

    def __len__(self) -> int:
        return self.times.size

    def field(self, k: int) -> Field:
        return Field(self.grid, self.values[k], float(self.times[k]))

    @property
    def snapshots(self) -> list[Field]:
        return [self.field(k) for k in range(len(self))]


# ---------------------------------------------------------------------------
# boundary data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """Time-dependent Dirichlet value f(t), spatially uniform on its boundary.

    Use the constructors :meth:`constant`, :meth:`decreasing_to`,
    :meth:`tabulated` and :meth:`from_function`.
    """
    kind: str
    fn: Callable[[float], float]
    lower: float | None
    upper: float | None
    t_limit: float | None
    monotone_after: float | None = None
    shift: float = 0.0

    def __call__(self, t: float) -> float:
        return float(self.fn(t)) + self.shift

    @classmethod
    def constant(cls, mu: float) -> "BoundaryProfile":
        if mu < 0:
            raise ParameterError("boundary values must be >= 0")
        return cls("constant", lambda t: mu, mu, mu, mu, monotone_after=0.0)

    @classmethod
    def decreasing_to(cls, start: float, target: float, T0: float,
                      rate: float = 1.0) -> "BoundaryProfile":
        """start for t <= T0, then target + (start-target) exp(-rate (t-T0))."""
        if start < target or target < 0:
            raise ParameterError("need start >= target >= 0")

        def fn(t):
            return start if t <= T0 else target + (start - target) * math.exp(-rate * (t - T0))
        return cls("decreasing", fn, target, start, target, monotone_after=T0)

    @classmethod
    def tabulated(cls, times: Sequence[float], values: Sequence[float],
                  monotone_after: float | None = None) -> "BoundaryProfile":
        ts = np.asarray(times, dtype=float)
        vs = np.asarray(values, dtype=float)
        if ts.shape != vs.shape or ts.size == 0 or np.any(np.diff(ts) <= 0):
            raise ParameterError("tabulated boundary needs increasing times matching values")
        if np.any(vs < 0):
            raise ParameterError("boundary values must be >= 0")
        if monotone_after is not None:
            after = vs[ts >= monotone_after]
            if np.any(np.diff(after) > 0):
                raise ParameterError("tabulated values increase after monotone_after")
        return cls("tabulated", lambda t: float(np.interp(t, ts, vs)),
                   float(vs.min()), float(vs.max()), float(vs[-1]), monotone_after)

    @classmethod
    def from_function(cls, fn: Callable[[float], float], lower=None, upper=None,
                      t_limit=None, monotone_after=None) -> "BoundaryProfile":
        return cls("function", fn, lower, upper, t_limit, monotone_after)

    def lifted(self, eps: float) -> "BoundaryProfile":
        def add(v):
            return None if v is None else v + eps
        from dataclasses import replace
        return replace(self, lower=add(self.lower), upper=add(self.upper),
                       t_limit=add(self.t_limit), shift=self.shift + eps)

    def sup(self) -> float | None:
        return self.upper

    def inf(self) -> float | None:
        return self.lower

    def limit(self) -> float | None:
        return self.t_limit


# ---------------------------------------------------------------------------
# regime classifier
# ---------------------------------------------------------------------------

CONVERGE_CONSTANT = "ConvergeToConstant"
CONVERGE_HARMONIC = "ConvergeToHarmonic"
BLOWUP = "BlowUpEverywhere"
OUTSIDE = "OutsideHypotheses"


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    theorem_tag: str
    thresholds: CriticalExponents | None
    limit_value: float | None = None
    failed_hypothesis: str | None = None
    also_applies: tuple[str, ...] = ()

    def __str__(self):
        if self.regime == OUTSIDE:
            return f"{OUTSIDE}({self.failed_hypothesis})"
        extra = f"({self.limit_value:.6g})" if self.limit_value is not None else ""
        return f"{self.regime}{extra} [{self.theorem_tag}]"


def _outside(reason, exps=None) -> RegimeReport:
    return RegimeReport(OUTSIDE, "none", exps, failed_hypothesis=reason)


def classify_regime(params: ModelParams, f: BoundaryProfile,
                    f_limit: float | Sequence[float] | None = None) -> RegimeReport:
    """Strongest large-time conclusion whose hypotheses the inputs satisfy.

    ``f_limit`` is the t -> infinity boundary function g: a scalar when it is
    constant, or the list of its values on the boundary components.  It
    defaults to ``f.limit()``.  No conclusion is extrapolated outside the
    proved parameter ranges.
    """
    n, m, mu0 = params.n, params.m, params.mu0
    exps = params.exponents
    g = f.limit() if f_limit is None else f_limit
    g_vals = None if g is None else np.atleast_1d(np.asarray(g, dtype=float))
    pts = params.points

    for p in pts:
        if p.gamma <= exps.p_c:
            return _outside("gamma below 2/(1-m)", exps)
    if not mu0 > 0:
        return _outside("mu0 must be positive", exps)
    f_inf = f.inf()
    if not params.cauchy_surrogate and (f_inf is None or f_inf < mu0):
        return _outside("boundary data not bounded below by mu0", exps)

    blowup_tag = "Theorem 1.9" if params.cauchy_surrogate else "Theorem 1.8"
    if any(p.gamma > exps.p_harm for p in pts):
        return RegimeReport(BLOWUP, blowup_tag, exps)

    if any(p.upper_gamma >= exps.p_harm for p in pts):
        return _outside("upper exponent gamma' not below (n-2)/m", exps)

    below_n = all(p.upper_gamma < exps.q_dim for p in pts)
    if params.cauchy_surrogate:
        also = ("Theorem 1.6",) if below_n else ()
        return RegimeReport(CONVERGE_CONSTANT, "Theorem 1.7", exps, mu0, also_applies=also)

    if g_vals is None:
        return _outside("boundary data has no declared limit", exps)
    if np.any(g_vals < mu0):
        return _outside("boundary limit g below mu0", exps)
    const = bool(np.all(g_vals == g_vals[0]))
    limit = float(g_vals[0]) if const else None
    also = []
    if const and below_n and limit == mu0:
        also.append("Theorem 1.3")
    if (const and m < (n - 2) / (n + 2)
            and all(p.upper_gamma < exps.q_mix for p in pts)):
        also.append("Theorem 1.4")
    return RegimeReport(CONVERGE_HARMONIC, "Theorem 1.5", exps, limit,
                        also_applies=tuple(also))


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

def probe_mask(grid: Grid, params: ModelParams | None = None, inner: float | None = None,
               outer: float | None = None) -> np.ndarray:
    """Boolean node mask of a compact region away from every singular point.

    Radial grids: inner <= r <= outer, defaulting to [delta1, (delta1+R)/2] on a
    ball (delta1 = R/4 without params) and to the middle 80% of an annulus.  The
    ball default stays clear of the layer next to the Dirichlet boundary,
    where u is pinned to f at every time.  Box grids: interior nodes at distance
    >= inner (default delta1) from every a_i with max-norm <= outer (default
    0.9 of the half width).
    """
    if grid.kind == "radial":
        r = grid.r
        if isinstance(getattr(params, "domain", None), Annulus) or grid.inner == "dirichlet":
            span = r[-1] - r[0]
            lo = r[0] + 0.1 * span if inner is None else inner
            hi = r[-1] - 0.1 * span if outer is None else outer
        else:
            R = r[-1]
            lo = getattr(params, "delta1", 0.25 * R) if inner is None else inner
            hi = 0.5 * (lo + R) if outer is None else outer
        mask = (r >= lo) & (r <= hi)
    else:
        X = grid.coords
        L = float(grid.x[-1])
        hi = 0.9 * L if outer is None else outer
        mask = np.max(np.abs(X), axis=1) <= hi
        mask[grid.dirichlet] = False
        if params is not None and params.points:
            lo = params.delta1 if inner is None else inner
            for p in params.points:
                mask &= np.linalg.norm(X - np.asarray(p.a), axis=1) >= lo
    if not mask.any():
        from .errors import DiagnosticError
        raise DiagnosticError("probe region contains no grid nodes")
    return mask
