"""Concave penalty families and the scalar thresholding problem.

All penalties are normalized so that the regularized objective reads

    0.5 * ||y - X b||^2 + big_lambda * lam * sum_j rho(|b_j|)

with ``rho`` the unit-scale penalty. For SCAD and MCP the shape of ``rho``
itself depends on ``lam``; for the SICA, L1, L0 and log families it does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SICA = "sica"
L1 = "l1"
L0 = "l0"
SCAD = "scad"
MCP = "mcp"
LOG = "log"

_FAMILIES = (SICA, L1, L0, SCAD, MCP, LOG)


class UnsupportedDerivativeError(ValueError):
    """Raised when a derivative-based quantity is requested for L0."""


@dataclass(frozen=True)
class PenaltySpec:
    """A penalty family member together with its scale parameters.

    family      one of "sica", "l1", "l0", "scad", "mcp", "log"
    a           shape parameter: SICA a > 0 (math.inf allowed, = L1 shape),
                SCAD a > 2, MCP a >= 1, log a > 0; ignored for L1/L0
    lam         regularization level (lambda >= 0)
    big_lambda  overall scale (Lambda > 0, default 1)
    """

    family: str
    a: float = math.inf
    lam: float = 0.0
    big_lambda: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.big_lambda <= 0:
            raise ValueError("big_lambda must be positive")
        if self.family == SICA and not (self.a > 0 or math.isinf(self.a)):
            raise ValueError("SICA requires a > 0 (use family='l0' for the a=0 limit)")
        if self.family == SCAD and not self.a > 2:
            raise ValueError("SCAD requires a > 2")
        if self.family == MCP and not self.a >= 1:
            raise ValueError("MCP requires a >= 1")
        if self.family == LOG and not self.a > 0:
            raise ValueError("log penalty requires a > 0")

    @property
    def gamma(self) -> float:
        """Effective L1-scale of the penalty term, big_lambda * lam."""
        return self.big_lambda * self.lam

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, self.a, lam, self.big_lambda)


def sica(a: float, lam: float = 0.0, big_lambda: float = 1.0) -> PenaltySpec:
    return PenaltySpec(SICA, a, lam, big_lambda)


def l1(lam: float = 0.0, big_lambda: float = 1.0) -> PenaltySpec:
    return PenaltySpec(L1, math.inf, lam, big_lambda)


def _needs_lam(pen: PenaltySpec):
    if pen.lam <= 0:
        raise ValueError(f"{pen.family} penalty shape is undefined at lam = 0")


def rho(pen: PenaltySpec, t) -> np.ndarray | float:
    """Unit-scale penalty value rho(t) for t >= 0 (vectorized)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("rho is defined for t >= 0")
    fam = pen.family
    if fam == L0:
        out = (t != 0).astype(float)
    elif fam == L1 or (fam == SICA and math.isinf(pen.a)):
        out = t.copy()
    elif fam == SICA:
        a = pen.a
        out = np.where(t > 0, (a + 1.0) * t / (a + t), 0.0)
    elif fam == LOG:
        a = pen.a
        out = (a + 1.0) * np.log1p(t / a)
    elif fam == SCAD:
        _needs_lam(pen)
        a, lam = pen.a, pen.lam
        out = np.where(
            t <= lam,
            t,
            np.where(
                t <= a * lam,
                (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0) * lam),
                (a + 1.0) * lam / 2.0,
            ),
        )
    elif fam == MCP:
        _needs_lam(pen)
        a, lam = pen.a, pen.lam
        out = np.where(t <= a * lam, t - t * t / (2.0 * a * lam), a * lam / 2.0)
    else:  # pragma: no cover
        raise AssertionError(fam)
    return float(out) if out.ndim == 0 else out


def rho_prime(pen: PenaltySpec, t) -> np.ndarray | float:
    """Derivative rho'(t) for t >= 0; at t = 0 the right-derivative rho'(0+)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("rho_prime is defined for t >= 0")
    fam = pen.family
    if fam == L0:
        raise UnsupportedDerivativeError("L0 penalty has no derivative")
    if fam == L1 or (fam == SICA and math.isinf(pen.a)):
        out = np.ones_like(t)
    elif fam == SICA:
        a = pen.a
        out = a * (a + 1.0) / (a + t) ** 2
    elif fam == LOG:
        a = pen.a
        out = (a + 1.0) / (a + t)
    elif fam == SCAD:
        _needs_lam(pen)
        a, lam = pen.a, pen.lam
        out = np.where(t <= lam, 1.0, np.maximum(a * lam - t, 0.0) / ((a - 1.0) * lam))
    elif fam == MCP:
        _needs_lam(pen)
        a, lam = pen.a, pen.lam
        out = np.maximum(1.0 - t / (a * lam), 0.0)
    else:  # pragma: no cover
        raise AssertionError(fam)
    return float(out) if out.ndim == 0 else out


def rho_prime_at_zero(pen: PenaltySpec) -> float:
    """rho'(0+), finite and positive for every differentiable family."""
    fam = pen.family
    if fam == L0:
        raise UnsupportedDerivativeError("L0 penalty has no derivative")
    if fam in (L1, SCAD, MCP) or (fam == SICA and math.isinf(pen.a)):
        return 1.0
    return 1.0 + 1.0 / pen.a  # SICA and log share rho'(0+) = (a+1)/a


def rho_bar(pen: PenaltySpec, t) -> np.ndarray | float:
    """Odd extension sgn(t) * rho'(|t|) (vectorized)."""
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * rho_prime(pen, np.abs(t))
    return float(out) if out.ndim == 0 else out


def max_concavity(pen: PenaltySpec) -> float:
    """Maximum concavity kappa(rho) = sup_t -rho''(t)."""
    fam = pen.family
    if fam == L0:
        raise UnsupportedDerivativeError("L0 penalty has no curvature")
    if fam == L1 or (fam == SICA and math.isinf(pen.a)):
        return 0.0
    if fam == SICA:
        return 2.0 * (1.0 / pen.a + 1.0 / pen.a**2)
    if fam == LOG:
        return (pen.a + 1.0) / pen.a**2
    _needs_lam(pen)
    if fam == SCAD:
        return 1.0 / ((pen.a - 1.0) * pen.lam)
    return 1.0 / (pen.a * pen.lam)  # MCP


def _local_concavity_sup(pen: PenaltySpec, lo: float, hi: float) -> float:
    """sup of -rho'' when |b_j| ranges over [lo, hi], 0 < lo <= hi.

    For SICA/log the curvature magnitude is decreasing in t, so the sup sits
    at the left endpoint; SCAD/MCP are piecewise linear with kinks, handled by
    interval intersection (kink points carry the one-sided curvature).
    """
    fam = pen.family
    if fam == L0:
        raise UnsupportedDerivativeError("L0 penalty has no curvature")
    if fam == L1 or (fam == SICA and math.isinf(pen.a)):
        return 0.0
    if fam == SICA:
        a = pen.a
        return 2.0 * a * (a + 1.0) / (a + lo) ** 3
    if fam == LOG:
        a = pen.a
        return (a + 1.0) / (a + lo) ** 2
    _needs_lam(pen)
    a, lam = pen.a, pen.lam
    if fam == SCAD:
        return 1.0 / ((a - 1.0) * lam) if (hi >= lam and lo <= a * lam) else 0.0
    return 1.0 / (a * lam) if lo <= a * lam else 0.0  # MCP


def local_concavity(pen: PenaltySpec, b) -> float:
    """Local concavity kappa(rho; b) = max_j -rho''(|b_j|); requires b_j != 0."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(b == 0):
        raise ValueError("local_concavity requires all components nonzero")
    t = np.abs(b)
    return float(max(_local_concavity_sup(pen, tj, tj) for tj in t))


def local_concavity_box(pen: PenaltySpec, center, radius: float) -> float:
    """sup of kappa(rho; b) over the box ||b - center||_inf <= radius.

    Every box coordinate must stay bounded away from zero (radius smaller
    than min |center_j|).
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    t = np.abs(center)
    if np.any(t - radius <= 0):
        raise ValueError("box must exclude zero in every coordinate")
    return float(max(_local_concavity_sup(pen, tj - radius, tj + radius) for tj in t))


def continuity_threshold(lam: float) -> float:
    """Smallest SICA shape a_0 giving a continuous thresholding rule at level lam."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return lam + math.sqrt(lam * lam + 2.0 * lam)


def penalty_value(pen: PenaltySpec, beta) -> float:
    """Penalty term of the regularized objective, big_lambda * lam * sum rho(|b_j|)."""
    if pen.gamma == 0.0:
        return 0.0
    beta = np.asarray(beta, dtype=float)
    return pen.gamma * float(np.sum(rho(pen, np.abs(beta))))


def _stationary_candidates(pen: PenaltySpec, z: float, gamma: float) -> list[float]:
    """Roots of t - z + gamma * rho'(t) = 0 on (0, z], plus kink points.

    Closed form for every family: SICA gives a cubic, log a quadratic,
    SCAD/MCP are piecewise linear, L1 is linear.
    """
    fam = pen.family
    cands: list[float] = []
    if fam == L1 or (fam == SICA and math.isinf(pen.a)):
        cands.append(z - gamma)
    elif fam == SICA:
        a = pen.a
        c = gamma * a * (a + 1.0)
        roots = np.roots([1.0, 2.0 * a - z, a * a - 2.0 * a * z, c - a * a * z])
        cands.extend(float(r.real) for r in roots if abs(r.imag) < 1e-9 * (1 + abs(r)))
    elif fam == LOG:
        a = pen.a
        # (t - z)(a + t) + gamma (a+1) = 0
        roots = np.roots([1.0, a - z, gamma * (a + 1.0) - a * z])
        cands.extend(float(r.real) for r in roots if abs(r.imag) < 1e-12 * (1 + abs(r)))
    elif fam == SCAD:
        a, lam = pen.a, pen.lam
        cands.append(z - gamma)                      # branch t <= lam
        denom = 1.0 - gamma / ((a - 1.0) * lam)      # branch lam < t <= a*lam
        if denom != 0.0:
            cands.append((z - gamma * a / (a - 1.0)) / denom)
        cands.extend([lam, a * lam, z])              # kinks and unpenalized branch
    elif fam == MCP:
        a, lam = pen.a, pen.lam
        denom = 1.0 - gamma / (a * lam)
        if denom != 0.0:
            cands.append((z - gamma) / denom)
        cands.extend([a * lam, z])
    elif fam == L0:
        cands.append(z)
    return cands


def scalar_threshold(pen: PenaltySpec, z: float) -> float:
    """Global minimizer of 0.5 (z - t)^2 + big_lambda * lam * rho(|t|) over t.

    Compares t = 0 against every stationary point of the smooth branch;
    exact ties resolve to 0. The output shrinks: |t| <= |z| and sgn(t)
    is sgn(z) or 0.
    """
    z = float(z)
    gamma = pen.gamma
    if z == 0.0 or not math.isfinite(gamma):
        return 0.0
    if gamma == 0.0:
        return z
    s, az = math.copysign(1.0, z), abs(z)
    if pen.family == L0:
        # value jump of size gamma at 0: keep z iff quadratic saving exceeds it
        return z if 0.5 * az * az > gamma else 0.0

    def objective(t: float) -> float:
        return 0.5 * (az - t) ** 2 + gamma * float(rho(pen, t))

    best_t, best_f = 0.0, objective(0.0)
    for t in _stationary_candidates(pen, az, gamma):
        if not (0.0 < t <= az):
            continue
        f = objective(t)
        if f < best_f:
            best_t, best_f = t, f
    return s * best_t
