"""Stochastic approximation estimators of the value-at-risk.

All schemes iterate ``xi <- xi - gamma_{n+1} H(xi, X)`` with
``H(xi, x) = 1 - 1{x >= xi} / (1 - alpha)``; they differ in the innovation
``X``: an exact loss (SA), a nested estimate (NSA), coupled nested estimates
telescoped over levels (MLSA), and adaptively refined versions of the last
two (adNSA, adMLSA).

Random streams are addressed by ``(seed, level, purpose)`` so that base
draws do not depend on refinement decisions. With ``c_a = 0`` the adaptive
schemes therefore reproduce their plain counterparts bit for bit.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from ._validation import UnsupportedModelError, check_alpha, check_level, check_positive
from .numerics import BiasLadder, StepSchedule
from .planning import LevelPlan
from .refinement import RefinementConfig, psi_table, refine_adaptively, refinement_budget
from .sampler import RefinableEstimate, coupled_block, nested_block
from .streams import as_seed_sequence, stream

__all__ = [
    "SchemeConfig",
    "SchemeRun",
    "LevelStats",
    "update_H",
    "run_sa",
    "run_nsa",
    "run_mlsa",
    "run_adnsa",
    "run_admlsa",
    "SCHEMES",
]

SCHEMES = ("sa", "nsa", "mlsa", "adnsa", "admlsa")
_BLOCK = 1 << 14


@dataclass(frozen=True)
class SchemeConfig:
    """Everything a scheme needs besides the model, the plan and the seed.

    ``init`` is a constant starting iterate or a ``(low, high)`` interval to
    draw it uniformly from. ``scale_c`` is only read by the planners.
    """

    alpha: float
    step: StepSchedule
    ladder: BiasLadder = BiasLadder(K=1)
    refinement: Optional[RefinementConfig] = None
    init: Union[float, Tuple[float, float]] = 0.0
    scale_c: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        check_positive(self.scale_c, "scale_c")
        if isinstance(self.init, (tuple, list)):
            lo, hi = map(float, self.init)
            if not lo < hi:
                raise ValueError(f"init interval must satisfy low < high, got {self.init!r}")
            object.__setattr__(self, "init", (lo, hi))

    @property
    def k_alpha(self) -> float:
        return 1.0 / (1.0 - self.alpha)


@dataclass
class LevelStats:
    level: int
    iterations: int
    evals: int
    mean_eta: float = 0.0


@dataclass
class SchemeRun:
    estimate: float
    inner_evals: int
    outer_draws: int
    wall_time: float
    seed: object = None
    per_level: List[LevelStats] = field(default_factory=list)


def update_H(alpha: float, xi: float, x: float) -> float:
    return 1.0 - 1.0 / (1.0 - alpha) if x >= xi else 1.0


def _initial(config: SchemeConfig, seed, level: int) -> float:
    if isinstance(config.init, tuple):
        return float(stream(seed, "init", level).uniform(*config.init))
    return float(config.init)


def _walk(xi, xs, steps, jump):
    """Run the recursion over a block of innovations; ``jump = 1 - 1/(1-alpha)``."""
    for x, g in zip(xs.tolist(), steps.tolist()):
        xi -= g * (jump if x >= xi else 1.0)
    return xi


def _walk_pair(xf, xc, fine, coarse, steps, jump):
    for a, b, g in zip(fine.tolist(), coarse.tolist(), steps.tolist()):
        xf -= g * (jump if a >= xf else 1.0)
        xc -= g * (jump if b >= xc else 1.0)
    return xf, xc


def _first_thresholds(rc, tab, sums, sq, count):
    """Echelon-0 thresholds of a block, computed exactly as the scalar path does."""
    if tab.shape[1] == 0:
        return [-1.0] * len(sums)
    thr = rc.constant * tab[:, 0]
    if rc.mode == "sigma":
        m = sums / count
        thr = thr * np.sqrt(np.maximum(0.0, sq / count - m * m))
    return thr.tolist()


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        run = fn(*args, **kw)
        run.wall_time = time.perf_counter() - t0
        return run
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


@_timed
def run_sa(config: SchemeConfig, model, n_iters: int, seed=None) -> SchemeRun:
    """Plain SA driven by exact draws of the loss (one evaluation each)."""
    if not model.supports_exact:
        raise UnsupportedModelError(f"{type(model).__name__} has no exact loss simulation")
    n_iters = check_level(n_iters, "n_iters", 1)
    ss = as_seed_sequence(seed)
    rng = stream(ss, "level", 0, "exact")
    xi = _initial(config, ss, 0)
    jump = 1.0 - config.k_alpha
    done = 0
    while done < n_iters:
        b = min(_BLOCK, n_iters - done)
        xi = _walk(xi, model.exact_loss(rng, b), config.step.block(done + 1, b), jump)
        done += b
    return SchemeRun(xi, n_iters, n_iters, 0.0, ss.entropy, [LevelStats(0, n_iters, n_iters)])


def _single_level(config, model, level, n_iters, ss, refine):
    """One nested recursion at ``level``; returns ``(xi, LevelStats)``."""
    ladder = config.ladder
    count = ladder.count(level)
    outer_rng = stream(ss, "level", level, "outer")
    inner_rng = stream(ss, "level", level, "inner")
    xi = _initial(config, ss, level)
    jump = 1.0 - config.k_alpha
    rc = config.refinement.with_step(config.step) if refine else None
    active = refine and refinement_budget(rc.theta, level) > 0
    sigma = active and rc.mode == "sigma"
    with_sq = sigma
    ref_rng = stream(ss, "level", level, "refine") if active else None
    evals, etas, done = 0, 0, 0
    for outer, sums, sq in nested_block(model, count, n_iters, outer_rng, inner_rng, with_sq):
        b = len(sums)
        steps = config.step.block(done + 1, b)
        if not active:
            xi = _walk(xi, sums / count, steps, jump)
            evals += b * count
        else:
            tab = psi_table(rc, ladder, level, np.arange(done + 1, done + b + 1))
            thr0 = _first_thresholds(rc, tab, sums, sq, count)
            sq = sq.tolist() if sq is not None else [0.0] * b
            for i, (o, s, g) in enumerate(zip(outer.tolist(), sums.tolist(), steps.tolist())):
                x = s / count
                if not abs(x - xi) < thr0[i]:
                    evals += count
                else:
                    est = RefinableEstimate(o, level, count, s, sq[i], ladder.M)
                    out = refine_adaptively(rc, ladder, model, est, xi, done + i + 1, ref_rng,
                                            psis=tab[i])
                    x = est.mean()
                    evals += est.evals
                    etas += out.eta
                xi -= g * (jump if x >= xi else 1.0)
        done += b
    return xi, LevelStats(level, n_iters, evals, etas / n_iters)


def _coupled_level(config, model, level, n_iters, ss, refine):
    """Fine and coarse recursions at ``level``; returns ``(xi_f - xi_c, LevelStats)``."""
    ladder = config.ladder
    nf, nc = ladder.count(level), ladder.count(level - 1)
    outer_rng = stream(ss, "level", level, "outer")
    inner_rng = stream(ss, "level", level, "inner")
    xf = xc = _initial(config, ss, level)
    jump = 1.0 - config.k_alpha
    rc = config.refinement.with_step(config.step) if refine else None
    active = refine and refinement_budget(rc.theta, level) > 0
    sigma = active and rc.mode == "sigma"
    with_sq = sigma
    if active:
        rng_f = stream(ss, "level", level, "refine", "fine")
        rng_c = stream(ss, "level", level, "refine", "coarse")
    evals, etas, done = 0, 0, 0
    for outer, fs, fsq, cs, csq in coupled_block(model, nf, nc, n_iters, outer_rng, inner_rng,
                                                 with_sq):
        b = len(fs)
        steps = config.step.block(done + 1, b)
        if not active:
            xf, xc = _walk_pair(xf, xc, fs / nf, cs / nc, steps, jump)
            evals += b * nf
        else:
            ranks = np.arange(done + 1, done + b + 1)
            tab_f = psi_table(rc, ladder, level, ranks)
            tab_c = psi_table(rc, ladder, level - 1, ranks)
            thr_f = _first_thresholds(rc, tab_f, fs, fsq, nf)
            thr_c = _first_thresholds(rc, tab_c, cs, csq, nc)
            if fsq is None:
                fsq = csq = np.zeros(b)
            rows = zip(outer.tolist(), fs.tolist(), fsq.tolist(), cs.tolist(), csq.tolist(),
                       steps.tolist())
            for i, (o, f, fq, c, cq, g) in enumerate(rows):
                n = done + i + 1
                a, bb = f / nf, c / nc
                extra = 0
                if abs(bb - xc) < thr_c[i]:
                    coarse = RefinableEstimate(o, level - 1, nc, c, cq, ladder.M)
                    oc = refine_adaptively(rc, ladder, model, coarse, xc, n, rng_c, psis=tab_c[i])
                    bb = coarse.mean()
                    extra += coarse.evals - nc
                    etas += oc.eta
                if abs(a - xf) < thr_f[i]:
                    fine = RefinableEstimate(o, level, nf, f, fq, ladder.M)
                    of = refine_adaptively(rc, ladder, model, fine, xf, n, rng_f, psis=tab_f[i])
                    a = fine.mean()
                    extra += fine.evals - nf
                    etas += of.eta
                xc -= g * (jump if bb >= xc else 1.0)
                xf -= g * (jump if a >= xf else 1.0)
                evals += nf + extra
        done += b
    return xf - xc, LevelStats(level, n_iters, evals, etas / n_iters)


def _require_refinement(config):
    if config.refinement is None:
        raise ValueError("adaptive schemes need a refinement config")


@_timed
def run_nsa(config: SchemeConfig, model, level: int, n_iters: int, seed=None) -> SchemeRun:
    """Nested SA with ``K * M**level`` inner samples per iteration."""
    level = check_level(level)
    n_iters = check_level(n_iters, "n_iters", 1)
    ss = as_seed_sequence(seed)
    xi, st = _single_level(config, model, level, n_iters, ss, refine=False)
    return SchemeRun(xi, st.evals, n_iters, 0.0, ss.entropy, [st])


@_timed
def run_adnsa(config: SchemeConfig, model, level: int, n_iters: int, seed=None) -> SchemeRun:
    """Nested SA whose innovations are adaptively refined against the iterate."""
    _require_refinement(config)
    level = check_level(level)
    n_iters = check_level(n_iters, "n_iters", 1)
    ss = as_seed_sequence(seed)
    xi, st = _single_level(config, model, level, n_iters, ss, refine=True)
    return SchemeRun(xi, st.evals, n_iters, 0.0, ss.entropy, [st])


def _multilevel(config, model, plan, seed, refine):
    ss = as_seed_sequence(seed)
    xi, st = _single_level(config, model, 0, plan.iterations[0], ss, refine=False)
    stats = [st]
    for level in range(1, plan.L + 1):
        d, st = _coupled_level(config, model, level, plan.iterations[level], ss, refine)
        xi += d
        stats.append(st)
    return SchemeRun(xi, sum(s.evals for s in stats), sum(plan.iterations), 0.0, ss.entropy, stats)


@_timed
def run_mlsa(config: SchemeConfig, model, plan: LevelPlan, seed=None) -> SchemeRun:
    """Multilevel SA: level-0 NSA plus telescoped coupled corrections."""
    return _multilevel(config, model, plan, seed, refine=False)


@_timed
def run_admlsa(config: SchemeConfig, model, plan: LevelPlan, seed=None) -> SchemeRun:
    """Multilevel SA with both sides of each coupled pair refined separately."""
    _require_refinement(config)
    return _multilevel(config, model, plan, seed, refine=True)
