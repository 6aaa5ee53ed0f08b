"""Estimator-style front end: set parameters, ``fit`` on a loss model, read ``var_``."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bench.config import _resolve_cell
from .bench.runner import _dispatch
from .models import NestedLossModel
from .schemes import SCHEMES

__all__ = ["VaREstimator"]

# planner constants of the bundled option configs, used when scale_c is None
DEFAULT_SCALE_C = {"sa": 1.0, "nsa": 1.0, "mlsa": 1.0, "adnsa": 2.0, "admlsa": 700.0}


class VaREstimator(BaseEstimator):
    """Value-at-risk of a nested loss by one of the SA schemes.

    Parameters mirror the per-scheme keys of an experiment config. The
    iteration amounts and level counts are planned from ``epsilon`` unless
    ``levels`` (multilevel) or ``level`` (adNSA) pin them. ``scale_c=None``
    picks the planner constant of the bundled option configs for the scheme.

    Examples
    --------
    >>> from nestedvar import OptionModel
    >>> est = VaREstimator("mlsa", epsilon=1/64, h0=1/16, random_state=0)
    >>> est.fit(OptionModel()).var_  # doctest: +SKIP
    """

    def __init__(self, scheme="admlsa", alpha=0.975, epsilon=1 / 64, h0=1 / 16, M=2,
                 step_a=1.0, step_b=100.0, step_beta=1.0, scale_c=None, framework="lp",
                 p_star=11.0, delta=0.95, mode="constant", c_a=1.0, c_p=3.0, theta=None,
                 levels=None, level=None, init=0.0, random_state=None):
        self.scheme = scheme
        self.alpha = alpha
        self.epsilon = epsilon
        self.h0 = h0
        self.M = M
        self.step_a = step_a
        self.step_b = step_b
        self.step_beta = step_beta
        self.scale_c = scale_c
        self.framework = framework
        self.p_star = p_star
        self.delta = delta
        self.mode = mode
        self.c_a = c_a
        self.c_p = c_p
        self.theta = theta
        self.levels = levels
        self.level = level
        self.init = init
        self.random_state = random_state

    def _row(self, kind):
        scale_c = DEFAULT_SCALE_C[kind] if self.scale_c is None else self.scale_c
        ref = {"framework": self.framework, "p_star": self.p_star, "delta": self.delta,
               "mode": self.mode, "c_a": self.c_a, "c_p": self.c_p}
        if self.theta is not None:
            ref["theta"] = self.theta
        row = {"step": {"a": self.step_a, "b": self.step_b, "beta": self.step_beta},
               "scale_c": scale_c, "init": self.init, "refinement": ref,
               "h0": self.h0, "M": self.M}
        if self.levels is not None:
            row["levels"] = self.levels
        if self.level is not None:
            row["level"] = self.level
        return row

    def _seed(self):
        rs = self.random_state
        if rs is None:
            return np.random.SeedSequence()
        if isinstance(rs, np.random.SeedSequence):
            return rs
        if isinstance(rs, numbers.Integral) and rs >= 0:
            return int(rs)
        raise ValueError(f"random_state must be None, a non-negative int or a SeedSequence, "
                         f"got {rs!r}")

    def fit(self, X, y=None):
        """Run the scheme on the loss model ``X``; ``y`` is ignored."""
        if not isinstance(X, NestedLossModel):
            raise TypeError(f"fit expects a NestedLossModel, got {type(X).__name__}")
        kind = str(self.scheme).lower()
        if kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        self.cell_ = _resolve_cell(kind, self._row(kind), float(self.epsilon), X, float(self.alpha),
                                   f"{type(self).__name__}")
        self.run_ = _dispatch(self.cell_, X, self._seed())
        self.var_ = float(self.run_.estimate)
        self.n_inner_evals_ = int(self.run_.inner_evals)
        return self

    def error(self, reference: float) -> float:
        """Absolute error of the fitted estimate against ``reference``."""
        check_is_fitted(self, "var_")
        return abs(self.var_ - float(reference))
