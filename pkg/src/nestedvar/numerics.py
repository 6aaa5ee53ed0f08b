"""Numerical primitives shared by the estimators.

Step-size and saturation schedules, the geometric bias ladder, standard
normal sampling and quantiles, and log-log slope regression.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._validation import DegenerateInputError, check_in_open_unit, check_positive

__all__ = [
    "StepSchedule",
    "SaturationSchedule",
    "BiasLadder",
    "PowerLawFit",
    "step",
    "saturation",
    "bias_at",
    "norm_cdf",
    "inv_norm_cdf",
    "standard_normal",
    "fit_loglog",
]


@dataclass(frozen=True)
class StepSchedule:
    """Learning rate ``a * (b + n) ** -beta``.

    ``b = 0`` gives the textbook ``gamma_1 n^-beta`` decay; the shifted form is
    what the case studies use (e.g. ``2 / (2500 + n)``).
    """

    a: float
    b: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        check_positive(self.a, "a")
        if not self.b >= 0:
            raise ValueError(f"b must be non-negative, got {self.b!r}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta!r}")

    def __call__(self, n):
        return self.a * (self.b + n) ** (-self.beta)

    def block(self, first: int, count: int) -> np.ndarray:
        """Steps for ranks ``first, ..., first + count - 1``."""
        n = np.arange(first, first + count, dtype=float)
        return self.a * (self.b + n) ** (-self.beta)


@dataclass(frozen=True)
class SaturationSchedule:
    """Saturation sequence ``u_n = gamma1 * n ** -delta``."""

    gamma1: float = 1.0
    delta: float = 0.95

    def __post_init__(self):
        check_positive(self.gamma1, "gamma1")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta!r}")

    def __call__(self, n):
        return self.gamma1 * n ** (-self.delta)


@dataclass(frozen=True)
class BiasLadder:
    """Geometric bias scale ``h_s = M**-s / K``.

    Integer levels map to exact inner sample counts ``K * M**level``; real
    exponents are only ever used inside refinement thresholds.
    """

    K: int
    M: int = 2

    def __post_init__(self):
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if not (isinstance(self.M, (int, np.integer)) and self.M >= 2):
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")

    @property
    def h0(self) -> float:
        return 1.0 / self.K

    def h(self, s: float) -> float:
        if s < 0:
            raise ValueError(f"bias exponent must be non-negative, got {s!r}")
        return self.M ** (-s) / self.K

    def count(self, level: int) -> int:
        """Inner sample count ``1 / h_level`` as an exact integer."""
        if level < 0 or int(level) != level:
            raise ValueError(f"level must be a non-negative integer, got {level!r}")
        return self.K * self.M ** int(level)

    @classmethod
    def from_h0(cls, h0: float, M: int = 2) -> "BiasLadder":
        K = round(1.0 / h0)
        if K < 1 or not math.isclose(K * h0, 1.0, rel_tol=1e-9):
            raise ValueError(f"h0 must be the reciprocal of a positive integer, got {h0!r}")
        return cls(K=int(K), M=M)


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r2: float

    def predict(self, x):
        return math.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def step(schedule: StepSchedule, n: int) -> float:
    if n < 1:
        raise ValueError(f"step rank must be >= 1, got {n!r}")
    return float(schedule(n))


def saturation(schedule: SaturationSchedule, n: int) -> float:
    if n < 1:
        raise ValueError(f"saturation rank must be >= 1, got {n!r}")
    return float(schedule(n))


def bias_at(ladder: BiasLadder, s: float) -> float:
    return ladder.h(s)


_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation (relative error ~1.15e-9 before refinement).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile, accurate to well below 1e-9.

    Rational first guess followed by one Halley step on ``erfc``. The upper
    half is mapped onto the lower one so the correction never works against
    cancellation in ``Phi(x) - p`` near 1.
    """
    p = check_in_open_unit(p, "p")
    if p > 0.5:
        return -inv_norm_cdf(1.0 - p)
    if p == 0.5:
        return 0.0
    x = _acklam(p)
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def standard_normal(rng: np.random.Generator, size=None):
    return rng.standard_normal(size)


def fit_loglog(points: Iterable[Sequence[float]]) -> PowerLawFit:
    """Ordinary least squares of ``ln y`` on ``ln x``."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise DegenerateInputError("need at least two points for a log-log fit")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DegenerateInputError("log-log fit requires positive coordinates")
    if len(np.unique(xs)) != len(xs):
        raise DegenerateInputError("log-log fit requires distinct x values")
    lx, ly = np.log(xs), np.log(ys)
    mx, my = lx.mean(), ly.mean()
    dx, dy = lx - mx, ly - my
    slope = float(np.dot(dx, dy) / np.dot(dx, dx))
    intercept = float(my - slope * mx)
    ss_tot = float(np.dot(dy, dy))
    resid = dy - slope * dx
    ss_res = float(np.dot(resid, resid))
    # residuals at rounding level mean an exact fit, even when y is (nearly) flat
    noise = len(ly) * (1e-13 * max(1.0, float(np.abs(ly).max()))) ** 2
    r2 = 1.0 if ss_res <= noise else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return PowerLawFit(slope=slope, intercept=intercept, r2=r2)
