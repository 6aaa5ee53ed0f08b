"""Level counts and per-level iteration amounts for a prescribed accuracy."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ._validation import check_epsilon, check_positive
from .numerics import BiasLadder
from .refinement import Framework, ceil_tol

__all__ = [
    "LevelPlan",
    "plan_levels_mlsa",
    "plan_levels_adaptive",
    "plan_iterations_mlsa",
    "plan_iterations_admlsa",
    "plan_iterations_single",
    "strong_error_rate",
]


@dataclass(frozen=True)
class LevelPlan:
    L: int
    iterations: Tuple[int, ...]

    def __post_init__(self):
        its = tuple(int(n) for n in self.iterations)
        if self.L < 0 or len(its) != self.L + 1:
            raise ValueError(f"a plan with L={self.L} needs {self.L + 1} iteration counts")
        if any(n < 1 for n in its):
            raise ValueError(f"iteration counts must be >= 1, got {its}")
        object.__setattr__(self, "iterations", its)

    def cost(self, ladder: BiasLadder) -> int:
        """Inner evaluations of an unrefined multilevel run."""
        return sum(n * ladder.count(l) for l, n in enumerate(self.iterations))


def _check_gap(ladder, epsilon):
    epsilon = check_epsilon(epsilon)
    if not ladder.h0 > epsilon:
        raise ValueError(f"need h0 > epsilon, got h0={ladder.h0!r}, epsilon={epsilon!r}")
    return epsilon


def plan_levels_mlsa(ladder: BiasLadder, epsilon: float) -> int:
    epsilon = _check_gap(ladder, epsilon)
    return ceil_tol(math.log(ladder.h0 / epsilon) / math.log(ladder.M))


def plan_levels_adaptive(ladder: BiasLadder, epsilon: float, theta: float) -> int:
    epsilon = _check_gap(ladder, epsilon)
    return ceil_tol(math.log(ladder.h0 / epsilon) / ((1.0 + theta) * math.log(ladder.M)))


def strong_error_rate(h, framework: Framework):
    """``eps(h)``: strong error of the indicator increment at bias ``h``."""
    h = np.asarray(h, dtype=float)
    if framework.is_lp:
        p = framework.p_star
        return h ** (p / (2.0 * (1.0 + p)))
    if framework.kind == "gaussian":
        return np.sqrt(h * np.abs(np.log(h)))
    return np.sqrt(h)


def _hs(ladder, L):
    return np.array([ladder.h(l) for l in range(L + 1)])


def _ceil_all(x):
    return tuple(max(1, int(math.ceil(v))) for v in x)


def plan_iterations_mlsa(ladder: BiasLadder, epsilon: float, L: int, framework: Framework,
                         beta: float = 1.0, scale_c: float = 1.0) -> LevelPlan:
    epsilon = check_epsilon(epsilon)
    check_positive(scale_c, "scale_c")
    h = _hs(ladder, L)
    e = strong_error_rate(h, framework) ** (1.0 / (1.0 + beta))
    total = np.sum(h ** (-beta / (1.0 + beta)) * e)
    n = scale_c * epsilon ** (-2.0 / beta) * total ** (1.0 / beta) * h ** (1.0 / (1.0 + beta)) * e
    return LevelPlan(L, _ceil_all(n))


def admlsa_exponents(framework: Framework, beta: float, theta: float):
    """Return ``(rate, sum_exponent, level_exponent)`` of the adaptive iteration formula.

    ``rate`` is the exponent applied to ``epsilon**-2`` and to the level sum.
    """
    if framework.is_lp:
        p, d = framework.p_star, framework.delta
        if d < beta:
            den = 2.0 * (1 + p) * (d + (1 + d) * p)
            ea = ((3 * (1 + theta) - 2 * d) * p * p + (2 * (1 + theta) + d * (1 + 3 * theta)) * p
                  + 2 * d * (1 + theta)) / den
            eb = ((5 + 3 * theta) * p + 4 + 2 * theta) * p / den
            return d, ea, eb
        den = 2.0 * (1 + p) * (d + (1 + beta) * p)
        ea = -((2 * beta - (1 + theta)) * p + (2 * beta - (1 + theta) * d)) * p / den
        eb = (2 + (3 + theta) * p) * p / den
        return beta, ea, eb
    return beta, -(2 * beta - (1 + theta)) / (2 * (1 + beta)), (3 + theta) / (2 * (1 + beta))


def plan_iterations_admlsa(ladder: BiasLadder, epsilon: float, L: int, framework: Framework,
                           theta: float, beta: float = 1.0, scale_c: float = 1.0) -> LevelPlan:
    epsilon = check_epsilon(epsilon)
    check_positive(scale_c, "scale_c")
    h = _hs(ladder, L)
    rate, ea, eb = admlsa_exponents(framework, beta, theta)
    if framework.kind == "gaussian":
        lg = np.abs(np.log(h)) ** ((1 + theta) / (2 * (1 + beta)))
    else:
        lg = np.ones_like(h)
    total = np.sum(h ** ea * lg)
    n = scale_c * epsilon ** (-2.0 / rate) * total ** (1.0 / rate) * h ** eb * lg
    return LevelPlan(L, _ceil_all(n))


def plan_iterations_single(scheme: str, epsilon: float, framework: Framework,
                           beta: float = 1.0, scale_c: float = 1.0) -> int:
    epsilon = check_epsilon(epsilon)
    check_positive(scale_c, "scale_c")
    scheme = scheme.lower()
    if scheme not in ("sa", "nsa", "adnsa"):
        raise ValueError(f"single-level planning covers sa, nsa and adnsa, got {scheme!r}")
    if scheme == "adnsa" and framework.is_lp and framework.delta <= beta / 2:
        return max(1, int(math.ceil(scale_c * epsilon ** (-1.0 / framework.delta))))
    return max(1, int(math.ceil(scale_c * epsilon ** (-2.0 / beta))))
