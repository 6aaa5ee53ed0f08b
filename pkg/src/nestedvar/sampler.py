"""Refinable nested Monte Carlo estimates.

A :class:`RefinableEstimate` keeps running sums of the inner payoffs of one
outer scenario, so it can be refined from ``h_l`` to ``h_{l+1}`` by drawing
only the ``(M - 1) * count`` missing samples. Block samplers produce the same
quantities for many scenarios at once and are what the schemes use for their
base draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_level
from .models import NestedLossModel
from .numerics import BiasLadder

__all__ = [
    "RefinableEstimate",
    "CoupledPair",
    "sample_estimate",
    "refine_once",
    "empirical_std",
    "sample_coupled_pair",
    "nested_block",
    "coupled_block",
]

# cap on the number of normals materialized by one block draw
MAX_BLOCK = 1 << 20


def _neumaier(total, comp, x):
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


class RefinableEstimate:
    """Inner Monte Carlo state of one outer scenario.

    ``sum`` and ``sum_sq`` are compensated running sums; ``evals`` counts every
    inner payoff ever drawn for this estimate and equals ``count``.
    """

    __slots__ = ("outer", "base_level", "echelon", "count", "M",
                 "_sum", "_sum_c", "_sq", "_sq_c", "evals")

    def __init__(self, outer, base_level, count, total, total_sq=0.0, M=2, echelon=0,
                 evals=None):
        self.outer = outer
        self.base_level = int(base_level)
        self.echelon = int(echelon)
        self.count = int(count)
        self.M = int(M)
        self._sum, self._sum_c = float(total), 0.0
        self._sq, self._sq_c = float(total_sq), 0.0
        self.evals = self.count if evals is None else int(evals)

    @property
    def sum(self) -> float:
        return self._sum + self._sum_c

    @property
    def sum_sq(self) -> float:
        return self._sq + self._sq_c

    @property
    def level(self) -> int:
        """Current bias index ``base_level + echelon``."""
        return self.base_level + self.echelon

    def mean(self) -> float:
        return self.sum / self.count

    def add(self, total, total_sq, n):
        """Fold in the sums of ``n`` fresh inner payoffs."""
        self._sum, self._sum_c = _neumaier(self._sum, self._sum_c, float(total))
        self._sq, self._sq_c = _neumaier(self._sq, self._sq_c, float(total_sq))
        self.count += n
        self.evals += n

    def copy(self) -> "RefinableEstimate":
        out = RefinableEstimate.__new__(RefinableEstimate)
        for name in self.__slots__:
            setattr(out, name, getattr(self, name))
        return out

    def __repr__(self):
        return (f"RefinableEstimate(level={self.base_level}+{self.echelon}, "
                f"count={self.count}, mean={self.mean():.6g})")


@dataclass
class CoupledPair:
    """Fine and coarse estimates sharing one outer scenario and the coarse samples."""

    coarse: RefinableEstimate
    fine: RefinableEstimate

    @property
    def outer(self):
        return self.fine.outer

    @property
    def shared(self) -> int:
        """Payoffs common to both sides (the coarse base sample)."""
        return self.coarse.count // self.coarse.M ** self.coarse.echelon

    @property
    def evals(self) -> int:
        # shared samples are paid once
        return self.fine.evals + self.coarse.evals - self.shared


def _draw_sums(model, outer, rng, n):
    x = model.inner_payoff(outer, rng, size=n)
    return float(np.sum(x)), float(np.dot(x, x))


def sample_estimate(model: NestedLossModel, ladder: BiasLadder, level: int, rng) -> RefinableEstimate:
    """One outer scenario with ``K * M**level`` inner payoffs."""
    level = check_level(level)
    n = ladder.count(level)
    outer = float(model.draw_outer(rng))
    total, sq = _draw_sums(model, outer, rng, n)
    return RefinableEstimate(outer, level, n, total, sq, M=ladder.M)


def refine_once(est: RefinableEstimate, model: NestedLossModel, rng) -> RefinableEstimate:
    """Multiply the inner sample of ``est`` by ``M`` in place and return it."""
    extra = (est.M - 1) * est.count
    total, sq = _draw_sums(model, est.outer, rng, extra)
    est.add(total, sq, extra)
    est.echelon += 1
    return est


def empirical_std(est: RefinableEstimate) -> float:
    if est.count < 1:
        raise ValueError("empirical_std needs at least one inner sample")
    m = est.sum / est.count
    return math.sqrt(max(0.0, est.sum_sq / est.count - m * m))


def sample_coupled_pair(model: NestedLossModel, ladder: BiasLadder, level: int, rng) -> CoupledPair:
    """Coarse estimate from the first ``K M**(l-1)`` payoffs, fine from all ``K M**l``."""
    level = check_level(level, minimum=1)
    nf, nc = ladder.count(level), ladder.count(level - 1)
    outer = float(model.draw_outer(rng))
    x = model.inner_payoff(outer, rng, size=nf)
    head = x[:nc]
    coarse = RefinableEstimate(outer, level - 1, nc, float(np.sum(head)), float(np.dot(head, head)),
                               M=ladder.M)
    fine = RefinableEstimate(outer, level, nf, float(np.sum(x)), float(np.dot(x, x)), M=ladder.M)
    return CoupledPair(coarse=coarse, fine=fine)


def _rows_per_chunk(count, inner_dim):
    return max(1, MAX_BLOCK // (count * max(1, inner_dim)))


def nested_block(model, count, size, outer_rng, inner_rng, with_sq=False):
    """Yield ``(outer, sums, sums_sq)`` chunks covering ``size`` scenarios.

    Each scenario gets ``count`` inner payoffs. Draw order does not depend on
    the chunk size, so results are reproducible across memory settings.
    ``sums_sq`` is ``None`` unless requested.
    """
    step = _rows_per_chunk(count, model.inner_dim)
    done = 0
    while done < size:
        b = min(step, size - done)
        outer = model.draw_outer(outer_rng, b)
        x = model.inner_payoff(outer, inner_rng, size=count)
        sums = x.sum(axis=1)
        sq = np.einsum("ij,ij->i", x, x) if with_sq else None
        yield outer, sums, sq
        done += b


def coupled_block(model, fine_count, coarse_count, size, outer_rng, inner_rng, with_sq=False):
    """Like :func:`nested_block` for coupled pairs.

    Yields ``(outer, fine_sums, fine_sq, coarse_sums, coarse_sq)``.
    """
    step = _rows_per_chunk(fine_count, model.inner_dim)
    done = 0
    while done < size:
        b = min(step, size - done)
        outer = model.draw_outer(outer_rng, b)
        x = model.inner_payoff(outer, inner_rng, size=fine_count)
        head = x[:, :coarse_count]
        cs = head.sum(axis=1)
        fs = cs + x[:, coarse_count:].sum(axis=1)
        if with_sq:
            csq = np.einsum("ij,ij->i", head, head)
            tail = x[:, coarse_count:]
            fsq = csq + np.einsum("ij,ij->i", tail, tail)
        else:
            csq = fsq = None
        yield outer, fs, fsq, cs, csq
        done += b
