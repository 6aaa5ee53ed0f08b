"""Nested loss models with closed-form value-at-risk.

A model exposes the outer risk factor ``Y``, one inner payoff draw per call
whose average over inner samples is the nested loss estimate ``X_h``, and,
when available, exact draws of the true loss ``X_0 = E[payoff | Y]`` and its
analytical quantile.

Outer scenarios are plain floats (the realized ``Y``), so they serialize
trivially and a scheme iteration can be replayed from ``(outer, normals)``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ._validation import UnsupportedModelError, check_alpha, check_positive
from .numerics import inv_norm_cdf

__all__ = [
    "NestedLossModel",
    "OptionModel",
    "SwapModel",
    "par_nominal",
    "model_from_config",
]


def _shape(outer, size) -> Tuple[int, ...]:
    base = np.shape(outer)
    if size is None:
        return base
    if isinstance(size, (int, np.integer)):
        return base + (int(size),)
    return base + tuple(size)


def _expand(outer, ndim_extra):
    outer = np.asarray(outer, dtype=float)
    return outer.reshape(outer.shape + (1,) * ndim_extra)


class NestedLossModel(ABC):
    """Loss ``X_0 = E[phi(Y, Z) | Y]`` simulatable by inner Monte Carlo."""

    #: number of standard normals consumed by one inner payoff
    inner_dim: int = 1

    @abstractmethod
    def draw_outer(self, rng: np.random.Generator, size=None):
        ...

    @abstractmethod
    def payoff(self, outer, normals):
        """Inner payoff as a deterministic function of its standard normals."""

    @abstractmethod
    def conditional_loss(self, outer):
        """``E[payoff | Y = outer]``, i.e. the exact loss of that scenario."""

    def inner_payoff(self, outer, rng: np.random.Generator, size=None):
        """Fresh inner payoffs for ``outer``; ``size`` appends trailing axes."""
        shape = _shape(outer, size)
        if self.inner_dim == 1:
            normals = rng.standard_normal(shape)
        else:
            normals = rng.standard_normal(shape + (self.inner_dim,))
        extra = len(shape) - np.ndim(outer)
        out = self.payoff(_expand(outer, extra), normals)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def supports_exact(self) -> bool:
        return False

    def exact_loss(self, rng: np.random.Generator, size=None):
        raise UnsupportedModelError(f"{type(self).__name__} cannot simulate the true loss exactly")

    def analytical_var(self, alpha: float) -> Optional[float]:
        return None


@dataclass(frozen=True)
class OptionModel(NestedLossModel):
    """Short ``x -> -x**2`` European option on a Brownian motion, maturity 1.

    The ``-1 -`` shift of the loss is folded into the payoff, so the inner
    payoff is ``(sqrt(tau) y + sqrt(1 - tau) z)**2 - 1`` and its conditional
    mean is ``tau (y**2 - 1)``.
    """

    tau: float = 0.5
    inner_dim = 1

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau!r}")

    def draw_outer(self, rng, size=None):
        return rng.standard_normal(size)

    def payoff(self, outer, normals):
        w = math.sqrt(self.tau) * outer + math.sqrt(1.0 - self.tau) * normals
        return w * w - 1.0

    def conditional_loss(self, outer):
        return self.tau * (np.square(outer) - 1.0)

    def inner_std(self, outer):
        """Exact standard deviation of one inner payoff given ``Y = outer``."""
        # W ~ N(m, s2): Var(W^2) = 2 s2^2 + 4 m^2 s2
        m2 = self.tau * np.square(outer)
        s2 = 1.0 - self.tau
        return np.sqrt(2.0 * s2 * s2 + 4.0 * m2 * s2)

    @property
    def supports_exact(self):
        return True

    def exact_loss(self, rng, size=None):
        y = rng.standard_normal(size)
        return self.tau * (y * y - 1.0)

    def analytical_var(self, alpha):
        alpha = check_alpha(alpha)
        q = inv_norm_cdf(0.5 * (1.0 - alpha))
        return self.tau * (q * q - 1.0)


def _coupon_schedule(maturity, coupon_interval):
    n = round(maturity / coupon_interval)
    if n < 2 or not math.isclose(n * coupon_interval, maturity, rel_tol=1e-12):
        raise ValueError("maturity must be an integer multiple (>= 2) of coupon_interval")
    return tuple(coupon_interval * i for i in range(1, n + 1))


def _cashflow_weights(r_bar, kappa_bar, coupon_times, first):
    t = (0.0,) + tuple(coupon_times)
    return np.array([
        math.exp(-r_bar * t[i]) * (t[i] - t[i - 1]) * math.exp(kappa_bar * t[i - 1])
        for i in range(first, len(t))
    ])


def par_nominal(s0, r_bar, kappa_bar, coupon_times, unit=1e4):
    """Nominal making the floating leg worth ``1 / unit`` per unit notional.

    With every coupon counted (including the first, fixed at inception) the
    floating leg is worth ``N S0 sum_i e^{-r T_i} D_i e^{kappa T_{i-1}}``;
    setting that to 1 and quoting losses in basis points (``unit = 1e4``)
    fixes the nominal.
    """
    legs = float(_cashflow_weights(r_bar, kappa_bar, coupon_times, 1).sum())
    return unit / (s0 * legs)


@dataclass(frozen=True)
class SwapModel(NestedLossModel):
    """Short interest-rate swap on a Black-Scholes rate, loss at horizon ``tau``.

    Outer factor ``Y = exp(-s^2 tau / 2 + s sqrt(tau) U0)``; inner factors
    ``Z_1`` (over ``T_1 - tau``) and ``Z_i`` (over ``Delta_i``) are mean-one
    lognormals. The strike cancels out of the loss and is not modelled.
    """

    s0: float = 0.01
    r_bar: float = 0.02
    kappa_bar: float = 0.12
    sigma_bar: float = 0.2
    coupon_times: Tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    tau: float = 7.0 / 360.0
    nominal: Optional[float] = None
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _dt: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        check_positive(self.s0, "s0")
        if self.sigma_bar < 0:
            raise ValueError(f"sigma_bar must be non-negative, got {self.sigma_bar!r}")
        times = tuple(float(t) for t in self.coupon_times)
        if len(times) < 2:
            raise ValueError("a swap needs at least two coupon dates")
        if any(b <= a for a, b in zip((0.0,) + times, times)):
            raise ValueError("coupon_times must be positive and strictly increasing")
        if not 0.0 < self.tau < times[0]:
            raise ValueError(f"tau must lie in (0, T_1), got {self.tau!r}")
        object.__setattr__(self, "coupon_times", times)
        if self.nominal is None:
            object.__setattr__(
                self, "nominal", par_nominal(self.s0, self.r_bar, self.kappa_bar, times))
        check_positive(self.nominal, "nominal")
        object.__setattr__(
            self, "_weights", _cashflow_weights(self.r_bar, self.kappa_bar, times, 2))
        deltas = np.diff(np.array((0.0,) + times))
        object.__setattr__(self, "_dt", np.concatenate(([times[0] - self.tau], deltas[1:-1])))

    @classmethod
    def from_schedule(cls, *, maturity=1.0, coupon_interval=0.25, tau_days=7.0, **kw):
        """Build from a regular schedule under the 30/360 day count."""
        return cls(coupon_times=_coupon_schedule(maturity, coupon_interval),
                   tau=tau_days / 360.0, **kw)

    @property
    def inner_dim(self):
        return len(self.coupon_times) - 1

    @property
    def deltas(self):
        return tuple(np.diff(np.array((0.0,) + self.coupon_times)))

    @property
    def annuity(self) -> float:
        return float(self._weights.sum())

    @property
    def scale(self) -> float:
        """``N * A * S0``: loss per unit log-return of the rate."""
        return self.nominal * self.annuity * self.s0

    def draw_outer(self, rng, size=None):
        u = rng.standard_normal(size)
        s = self.sigma_bar
        return np.exp(-0.5 * s * s * self.tau + s * math.sqrt(self.tau) * u)

    def payoff(self, outer, normals):
        s = self.sigma_bar
        logz = -0.5 * s * s * self._dt + s * np.sqrt(self._dt) * normals
        growth = np.exp(np.cumsum(logz, axis=-1)) @ self._weights
        return self.nominal * self.s0 * (outer * growth - self.annuity)

    def conditional_loss(self, outer):
        return self.scale * (np.asarray(outer, dtype=float) - 1.0)

    @property
    def supports_exact(self):
        return True

    def exact_loss(self, rng, size=None):
        return self.conditional_loss(self.draw_outer(rng, size))

    def analytical_var(self, alpha):
        alpha = check_alpha(alpha)
        s = self.sigma_bar
        q = inv_norm_cdf(alpha)
        return self.scale * (math.exp(q * s * math.sqrt(self.tau) - 0.5 * s * s * self.tau) - 1.0)


def swap_annuity(model: SwapModel) -> float:
    return model.annuity


def model_from_config(kind: str, params: dict) -> NestedLossModel:
    kind = kind.lower()
    params = dict(params or {})
    if kind == "option":
        return OptionModel(tau=float(params.get("tau", 0.5)))
    if kind == "swap":
        sched = {k: float(params.pop(k)) for k in ("maturity", "coupon_interval", "tau_days")
                 if k in params}
        kw = {k: float(v) for k, v in params.items()
              if k in ("s0", "r_bar", "kappa_bar", "sigma_bar", "nominal") and v is not None}
        unknown = set(params) - {"s0", "r_bar", "kappa_bar", "sigma_bar", "nominal"}
        if unknown:
            raise ValueError(f"unknown swap parameters: {sorted(unknown)}")
        return SwapModel.from_schedule(**sched, **kw)
    raise ValueError(f"unknown model kind {kind!r} (expected 'option' or 'swap')")
