"""Adaptive refinement of nested estimates.

An estimate at level ``l`` close to the current iterate is refined ``xM``
repeatedly until it leaves a shrinking band ``C * psi`` around the iterate,
or until ``ceil(theta * l)`` refinements have been spent.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from ._validation import ConfigurationError, check_level, check_positive
from .numerics import BiasLadder, SaturationSchedule, StepSchedule
from .sampler import RefinableEstimate, empirical_std, refine_once

__all__ = [
    "Framework",
    "RefinementConfig",
    "RefinementOutcome",
    "psi",
    "psi_table",
    "refinement_budget",
    "refine_adaptively",
    "heuristic_parameters",
]

log = logging.getLogger(__name__)

FRAMEWORKS = ("lp", "gaussian", "lipschitz")
# slack for ceilings of products that are integers in exact arithmetic
_CEIL_TOL = 1e-9


def ceil_tol(x: float) -> int:
    return int(math.ceil(x - _CEIL_TOL))


@dataclass(frozen=True)
class Framework:
    """Integrability setting selecting the threshold and planner formulas.

    ``lp`` carries the moment order ``p_star`` and the saturation schedule;
    ``gaussian`` and ``lipschitz`` share the logarithmic threshold.
    """

    kind: str = "lp"
    p_star: Optional[float] = None
    saturation: SaturationSchedule = field(default_factory=SaturationSchedule)

    def __post_init__(self):
        if self.kind not in FRAMEWORKS:
            raise ValueError(f"framework must be one of {FRAMEWORKS}, got {self.kind!r}")
        if self.kind == "lp":
            if self.p_star is None or not self.p_star > 1:
                raise ValueError(f"the lp framework needs p_star > 1, got {self.p_star!r}")

    @classmethod
    def lp(cls, p_star, delta=0.95, gamma1=1.0):
        return cls("lp", float(p_star), SaturationSchedule(gamma1=gamma1, delta=delta))

    @classmethod
    def gaussian(cls):
        return cls("gaussian")

    @classmethod
    def lipschitz(cls):
        return cls("lipschitz")

    @property
    def is_lp(self) -> bool:
        return self.kind == "lp"

    @property
    def delta(self) -> float:
        return self.saturation.delta


@dataclass(frozen=True)
class RefinementConfig:
    """Refinement constants.

    ``mode="constant"`` compares against ``c_a * psi``; ``mode="sigma"``
    against ``c_p * sigma_h * psi`` with the inner standard deviation
    re-estimated at every echelon. ``c_a = 0`` disables refinement and
    ``c_a = inf`` forces the full budget. ``step`` feeds ``gamma_n`` into the
    logarithmic threshold; schemes fill it with their own schedule if unset.
    """

    framework: Framework
    theta: float
    r: float
    mode: str = "constant"
    c_a: float = 1.0
    c_p: float = 3.0
    step: Optional[StepSchedule] = None
    diagnostics: bool = False

    def __post_init__(self):
        if self.mode not in ("constant", "sigma"):
            raise ValueError(f"mode must be 'constant' or 'sigma', got {self.mode!r}")
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta!r}")
        if not self.r > 1:
            raise ValueError(f"r must exceed 1, got {self.r!r}")
        const = self.c_a if self.mode == "constant" else self.c_p
        if not const >= 0:
            raise ValueError(f"confidence constant must be non-negative, got {const!r}")
        if self.framework.is_lp and self.r >= 2:
            log.info("r=%.4g >= 2 under the lp framework: outside the range covered by the theory",
                     self.r)

    @classmethod
    def heuristic(cls, framework: Framework, **kw) -> "RefinementConfig":
        theta, r = heuristic_parameters(framework.p_star, framework)
        return cls(framework=framework, theta=theta, r=r, **kw)

    @property
    def constant(self) -> float:
        return self.c_a if self.mode == "constant" else self.c_p

    def with_step(self, step: StepSchedule) -> "RefinementConfig":
        return self if self.step is not None else replace(self, step=step)


@dataclass
class RefinementOutcome:
    eta: int
    estimate: RefinableEstimate
    thresholds_crossed: List[Tuple[int, float, float]] = field(default_factory=list)


def refinement_budget(theta: float, level: int) -> int:
    """Maximum number of refinements ``ceil(theta * level)``; 0 at level 0."""
    level = check_level(level)
    return ceil_tol(theta * level)


def psi(config: RefinementConfig, ladder: BiasLadder, k: int, level: int, n: int) -> float:
    """Refinement threshold before the confidence constant.

    Evaluated at the real bias exponent ``theta * level * (r - 1) + k``.
    """
    if n < 1:
        raise ValueError(f"recursion rank must be >= 1, got {n!r}")
    theta, r, fw = config.theta, config.r, config.framework
    tail = ladder.h(theta * level * (r - 1.0) + k) ** (1.0 / r)
    if fw.is_lp:
        u = fw.saturation(n)
        return u ** (-1.0 / fw.p_star) * tail
    if config.step is None:
        raise ConfigurationError("the logarithmic threshold needs a step schedule")
    arg = config.step(n) ** -0.5 * ladder.h(level + k) ** (-0.5 * (1.0 + theta))
    if not arg > 1.0:
        raise ConfigurationError(
            f"log threshold undefined: argument {arg:.6g} <= 1 at k={k}, level={level}, n={n}")
    return math.sqrt(math.log(arg)) * tail


def psi_table(config: RefinementConfig, ladder: BiasLadder, level: int, ranks) -> np.ndarray:
    """``psi(k, level, n)`` for ``k < budget`` and every rank in ``ranks``.

    Vectorized counterpart of :func:`psi`, shape ``(len(ranks), budget)``.
    """
    budget = refinement_budget(config.theta, level)
    n = np.asarray(ranks, dtype=float)[:, None]
    if np.any(n < 1):
        raise ValueError("recursion ranks must be >= 1")
    k = np.arange(budget, dtype=float)[None, :]
    theta, r, fw = config.theta, config.r, config.framework
    tail = (ladder.M ** -(theta * level * (r - 1.0) + k) / ladder.K) ** (1.0 / r)
    if fw.is_lp:
        return (fw.saturation.gamma1 * n ** -fw.saturation.delta) ** (-1.0 / fw.p_star) * tail
    if config.step is None:
        raise ConfigurationError("the logarithmic threshold needs a step schedule")
    hk = ladder.M ** -(level + k) / ladder.K
    arg = config.step(n) ** -0.5 * hk ** (-0.5 * (1.0 + theta))
    if not np.all(arg > 1.0):
        raise ConfigurationError(f"log threshold undefined: argument <= 1 at level={level}")
    return np.sqrt(np.log(arg)) * tail


def refine_adaptively(config: RefinementConfig, ladder: BiasLadder, model, est: RefinableEstimate,
                      xi: float, n: int, rng, psis=None) -> RefinementOutcome:
    """Refine ``est`` in place while it stays within the band around ``xi``.

    ``psis`` may carry precomputed thresholds ``psi(k, level, n)`` for
    ``k = 0, 1, ...`` (one row of :func:`psi_table`).
    """
    level = est.base_level
    budget = refinement_budget(config.theta, level)
    c = config.constant
    sigma = config.mode == "sigma"
    trace = [] if config.diagnostics else None
    eta = 0
    while eta < budget:
        p = psis[eta] if psis is not None else psi(config, ladder, eta, level, n)
        thr = c * p
        if sigma:
            thr *= empirical_std(est)
        dist = abs(est.mean() - xi)
        if trace is not None:
            trace.append((eta, dist, thr))
        if not dist < thr:
            break
        refine_once(est, model, rng)
        eta += 1
    return RefinementOutcome(eta=eta, estimate=est, thresholds_crossed=trace or [])


def heuristic_parameters(p_star, framework) -> Tuple[float, float]:
    """Default ``(theta, r)``: ``theta`` from the moment order, ``r = 1 + 1/theta``."""
    kind = framework.kind if isinstance(framework, Framework) else str(framework)
    if kind == "lp":
        check_positive(p_star, "p_star")
        if not p_star > 2:
            raise ConfigurationError(f"the lp heuristic needs p_star > 2, got {p_star!r}")
        theta = (p_star / 2 - 1) / (p_star / 2 + 1)
    elif kind in ("gaussian", "lipschitz"):
        theta = 1.0
    else:
        raise ValueError(f"unknown framework {kind!r}")
    return theta, 1.0 + 1.0 / theta
