"""Closed-form comparison objects: upper barrier, supersolution, weight and mass threshold."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .core import (ModelParams, Trajectory, check_exponent_range, compute_delta0,
                   sphere_area)
from .errors import DomainError, ParameterError

# sup over [0,1] of |d/ds (1-s^2)^2| = 4 s (1-s^2), attained at s = 1/sqrt(3)
_Q1_SUP = 8.0 / (3.0 * math.sqrt(3.0))
# sup over [0,1] of |d^2/ds^2 (1-s^2)^2| = |12 s^2 - 4|, attained at s = 1
_Q2_SUP = 8.0


def _radii(x, center, n: int) -> np.ndarray:
    """|x - center| for points (..., n) or plain radii (radial mode)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n:
        return np.abs(x)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return np.linalg.norm(x - c, axis=-1)


# ---------------------------------------------------------------------------
# upper barrier
# ---------------------------------------------------------------------------

def A0_of(m: float, n: int, gamma_up: float, lambda_up: float) -> float:
    """Amplitude that makes the barrier a supersolution dominating u0 + 1."""
    k = (1 - m) ** 2 * (m * gamma_up + 1) * gamma_up + 2 * (1 - m) * (n - 1) + 2 * (1 + m)
    return max(lambda_up + 1.0, (m * k / (1 - m)) ** (1 / (1 - m)))


@dataclass(frozen=True)
class BarrierPhi:
    """A0 (1+t)^{1/(1-m)} / (r^{gamma'} (delta3 - r)^{2/(1-m)}) on 0 < r < delta3."""
    A0: float
    gamma_up: float
    delta3: float
    m: float
    n: int = 3
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.A0 > 0:
            raise ParameterError("A0 must be positive")
        if not 0 < self.delta3 < 1:
            raise ParameterError("delta3 must lie in (0, 1)")

    def __call__(self, x, t: float) -> np.ndarray:
        r = _radii(x, self.center, self.n)
        if np.any(r >= self.delta3) or np.any(r <= 0):
            raise DomainError("barrier is defined only for 0 < |x - a| < delta3")
        p = 1 / (1 - self.m)
        return self.A0 * (1 + t) ** p / (r ** self.gamma_up * (self.delta3 - r) ** (2 * p))


def phi_barrier(A0: float, gamma_up: float, delta3: float, m: float, n: int = 3,
                center=None) -> BarrierPhi:
    return BarrierPhi(A0, gamma_up, delta3, m, n, None if center is None else tuple(center))


def barrier_for(params: ModelParams, delta3: float, index: int = 0) -> BarrierPhi:
    """Barrier around point ``index`` using its (lambda', gamma') envelope."""
    p = params.points[index]
    lam_up = params.upper_lambda(p)
    if not delta3 < min(1.0, compute_delta0(params)):
        raise ParameterError("delta3 must be below min(1, delta0)")
    A0 = A0_of(params.m, params.n, p.upper_gamma, lam_up)
    return BarrierPhi(A0, p.upper_gamma, delta3, params.m, params.n, p.a)


def verify_barrier(traj: Trajectory, b: BarrierPhi) -> float:
    """sup over snapshots and nodes with 0 < |x-a| < delta3 of (u - phi)_+."""
    grid = traj.grid
    d = grid.distance(b.center if b.center is not None else np.zeros(b.n))
    inside = (d > 0) & (d < b.delta3)
    if not inside.any():
        return 0.0
    worst = 0.0
    for t, u in zip(traj.times, traj.values):
        worst = max(worst, float(np.max(u[inside] - b(d[inside], float(t)))))
    return max(worst, 0.0)


# ---------------------------------------------------------------------------
# supersolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupersolutionVeta:
    """v = [C0^m + sum_i (A_i (|x-a_i|^2 + eta)^{-gamma'_i/2})^m]^{1/m}."""
    n: int
    m: float
    C0: float
    A: tuple[float, ...] = ()
    gamma_up: tuple[float, ...] = ()
    eta: float = 1e-2
    centers: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        check_exponent_range(self.n, self.m)
        object.__setattr__(self, "A", tuple(float(a) for a in self.A))
        object.__setattr__(self, "gamma_up", tuple(float(g) for g in self.gamma_up))
        if len(self.A) != len(self.gamma_up):
            raise ParameterError("need one amplitude per exponent")
        if self.centers is None:
            object.__setattr__(self, "centers", tuple((0.0,) * self.n for _ in self.A))
        elif len(self.centers) != len(self.A):
            raise ParameterError("need one center per amplitude")
        if self.C0 < 0 or any(a <= 0 for a in self.A):
            raise ParameterError("need C0 >= 0 and positive amplitudes")
        if not self.eta > 0:
            raise ParameterError("eta must be positive")
        cap = (self.n - 2) / self.m
        for g in self.gamma_up:
            if not 0 < g <= cap:
                raise ParameterError(
                    f"gamma'={g} outside (0, (n-2)/m={cap:.6g}]: not a supersolution")

    def _sq(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        return [np.sum((x - np.asarray(c)) ** 2, axis=-1) for c in self.centers]

    def power_m(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.C0 ** self.m)
        for A, g, rho2 in zip(self.A, self.gamma_up, self._sq(x)):
            out = out + A ** self.m * (rho2 + self.eta) ** (-self.m * g / 2)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.power_m(x) ** (1 / self.m)

    def laplacian_m(self, x) -> np.ndarray:
        """Closed-form Laplacian of v^m."""
        x = np.asarray(x, dtype=float)
        n, m, eta = self.n, self.m, self.eta
        out = np.zeros(x.shape[:-1])
        for A, g, rho2 in zip(self.A, self.gamma_up, self._sq(x)):
            out -= (m * A ** m * g * (rho2 + eta) ** (-(m * g + 4) / 2)
                    * ((n - 2 - m * g) * rho2 + n * eta))
        return out


def v_eta(s: SupersolutionVeta, x) -> np.ndarray:
    return s(x)


def laplacian_v_eta_m(s: SupersolutionVeta, x) -> np.ndarray:
    return s.laplacian_m(x)


def fd_laplacian(fn, x, h: float) -> np.ndarray:
    """Central-difference Laplacian of fn at points x (..., n)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = -2 * n * fn(x)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        out = out + fn(x + e) + fn(x - e)
    return out / h ** 2


# ---------------------------------------------------------------------------
# weight psi and its constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightPsi:
    """psi = r^-beta1 on (0, delta2], eta^b1 on [delta2, delta1], 0 beyond.

    eta = delta2^{-beta1/b1} q(r) with the polynomial bump
    q(s) = (1 - s^2)^2, s = (r - delta2)/(delta1 - delta2), which is C^{1,1}.
    """
    n: int
    m: float
    beta1: float
    b1: float
    delta1: float
    delta2: float
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        check_exponent_range(self.n, self.m)
        p = 2 / (1 - self.m)
        if not 0 <= self.beta1 < self.n - p:
            raise ParameterError(f"beta1 must lie in [0, n - 2/(1-m)) = [0, {self.n - p:.6g})")
        if not self.b1 > p:
            raise ParameterError(f"b1 must exceed 2/(1-m) = {p:.6g}")
        if not 0 < self.delta2 < self.delta1:
            raise ParameterError("need 0 < delta2 < delta1")

    @property
    def width(self) -> float:
        return self.delta1 - self.delta2

    @property
    def eta_scale(self) -> float:
        return self.delta2 ** (-self.beta1 / self.b1)

    def _q(self, r):
        s = np.clip((np.asarray(r, dtype=float) - self.delta2) / self.width, 0.0, 1.0)
        L = self.width
        q = (1 - s ** 2) ** 2
        dq = -4 * s * (1 - s ** 2) / L
        d2q = (12 * s ** 2 - 4) / L ** 2
        inside = (np.asarray(r) > self.delta2) & (np.asarray(r) < self.delta1)
        return q, np.where(inside, dq, 0.0), np.where(inside, d2q, 0.0)

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        q, _, _ = self._q(r)
        with np.errstate(divide="ignore"):
            core = r ** (-self.beta1)
        shell = (self.eta_scale * q) ** self.b1
        return np.where(r <= self.delta2, core, np.where(r < self.delta1, shell, 0.0))

    def __call__(self, x) -> np.ndarray:
        return self.radial(_radii(x, self.center, self.n))

    def integrand(self, r) -> np.ndarray:
        """psi^{-m/(1-m)} |Lap psi|^{1/(1-m)} from the closed-form derivatives."""
        r = np.asarray(r, dtype=float)
        n, m, b, beta = self.n, self.m, self.b1, self.beta1
        p = 1 / (1 - m)
        q, dq, d2q = self._q(r)
        c = self.eta_scale
        eta, deta = c * q, c * dq
        lap_eta = c * (d2q + (n - 1) / r * dq)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = (beta * (n - 2 - beta)) ** p * r ** (-beta - 2 * p)
            shell = b ** p * eta ** (b - 2 * p) * np.abs(eta * lap_eta + (b - 1) * deta ** 2) ** p
        out = np.where(r <= self.delta2, core, np.where(r < self.delta1, shell, 0.0))
        return np.nan_to_num(out, nan=0.0)

    def I1(self) -> float:
        n, m, beta, d2 = self.n, self.m, self.beta1, self.delta2
        p = 1 / (1 - m)
        return (sphere_area(n) * beta ** p * (n - beta - 2) ** p / (n - beta - 2 * p)
                * d2 ** (n - beta - 2 * p))

    def sup_norms(self) -> tuple[float, float, float]:
        """Upper bounds for sup |eta|, |grad eta|, |Lap eta| on delta2 <= r <= delta1."""
        c, L = self.eta_scale, self.width
        g = c * _Q1_SUP / L
        lap = c * (_Q2_SUP / L ** 2 + (self.n - 1) / self.delta2 * _Q1_SUP / L)
        return c, g, lap

    def I2(self) -> float:
        n, m, b = self.n, self.m, self.b1
        p = 1 / (1 - m)
        e, g, lap = self.sup_norms()
        shell = sphere_area(n) / n * (self.delta1 ** n - self.delta2 ** n)
        return b ** p * e ** (b - 2 * p) * (e * lap + (b - 1) * g ** 2) ** p * shell

    def quadrature(self) -> float:
        """Adaptive quadrature of the integral that C_psi bounds."""
        w = sphere_area(self.n)
        n = self.n

        def f(r):
            return w * r ** (n - 1) * float(self.integrand(r))
        inner = integrate.quad(f, 0.0, self.delta2, limit=200)[0] if self.beta1 > 0 else 0.0
        outer = integrate.quad(f, self.delta2, self.delta1, limit=200,
                               points=[self.delta2 + self.width / math.sqrt(3)])[0]
        return inner + outer


def psi_weight(w: WeightPsi, x) -> np.ndarray:
    return w(x)


def C_psi(w: WeightPsi) -> float:
    """I1 + I2, an upper bound for int psi^{-m/(1-m)} |Lap psi|^{1/(1-m)} dx."""
    return w.I1() + w.I2()


# ---------------------------------------------------------------------------
# mass threshold
# ---------------------------------------------------------------------------

def log_mass_threshold_radius(n: int, lam1: float, gamma1: float, beta1: float, C: float,
                              T: float, delta2: float) -> float:
    """log of the radius delta below which the bump carries enough weighted mass.

    ``C`` is C1 + C2.  Log branch when gamma1 + beta1 = n, power branch when
    gamma1 + beta1 > n.  Works in logs because delta underflows for large C.
    """
    w = sphere_area(n)
    k = gamma1 + beta1
    if math.isclose(k, n, rel_tol=0, abs_tol=1e-12):
        return math.log(delta2) - C * math.exp(T) / (w * lam1)
    if k < n:
        raise ParameterError("need gamma1 + beta1 >= n")
    return -math.log(C * k * math.exp(T) / (w * lam1) + delta2 ** (n - k)) / (k - n)


def mass_threshold_radius(n: int, lam1: float, gamma1: float, beta1: float, C: float,
                          T: float, delta2: float) -> float:
    return math.exp(log_mass_threshold_radius(n, lam1, gamma1, beta1, C, T, delta2))


def M0_of(T: float, C2: float, params: ModelParams, w: WeightPsi, index: int = 0) -> float:
    """Truncation level above which the weighted mass stays positive on [0, T].

    Returns inf when the level exceeds the floating-point range.
    """
    p = params.points[index]
    beta_req = max(params.n - p.gamma, 0.0)
    if not math.isclose(w.beta1, beta_req, abs_tol=1e-12):
        raise ParameterError(f"weight must use beta1 = (n - gamma1)_+ = {beta_req:.6g}")
    C1 = C_psi(w)
    log_delta = log_mass_threshold_radius(params.n, p.lam, p.gamma, w.beta1, C1 + C2, T,
                                          w.delta2)
    log_M0 = math.log(p.lam) - p.gamma * log_delta
    return math.exp(log_M0) if log_M0 < 709.0 else math.inf


def weighted_mass(values: np.ndarray, psi_nodes: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(values * psi_nodes * weights))


__all__ = [
    "A0_of", "BarrierPhi", "phi_barrier", "barrier_for", "verify_barrier",
    "SupersolutionVeta", "v_eta", "laplacian_v_eta_m", "fd_laplacian",
    "WeightPsi", "psi_weight", "C_psi", "log_mass_threshold_radius", "mass_threshold_radius", "M0_of", "weighted_mass",
]
