import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedvar import (BiasLadder, RefinableEstimate, empirical_std, fit_loglog, refine_once,
                       sample_coupled_pair, sample_estimate)
from nestedvar.sampler import coupled_block, nested_block


class _Constant:
    """Model whose inner payoffs are a fixed value (for exact arithmetic checks)."""

    inner_dim = 1

    def __init__(self, value):
        self.value = value

    def draw_outer(self, rng, size=None):
        return rng.standard_normal(size)

    def inner_payoff(self, outer, rng, size=None):
        return np.full(size, float(self.value))


def test_sample_estimate_counts(option, rng):
    est = sample_estimate(option, BiasLadder(1), 0, rng)
    assert est.count == 1 and est.evals == 1
    assert est.mean() == est.sum
    assert sample_estimate(option, BiasLadder(16, 2), 3, rng).count == 128


def test_sample_estimate_is_one_nested_draw(option):
    est = sample_estimate(option, BiasLadder(4), 1, np.random.default_rng(3))
    rng = np.random.default_rng(3)
    y = float(option.draw_outer(rng))
    z = option.inner_payoff(y, rng, 8)
    assert est.outer == y
    assert est.mean() == pytest.approx(z.mean(), rel=1e-15)


def test_refine_identity_when_new_draws_equal_mean(rng):
    est = RefinableEstimate(0.0, 1, 4, 8.0, 16.0, M=2)
    refine_once(est, _Constant(2.0), rng)
    assert est.mean() == 2.0
    assert est.count == 8 and est.echelon == 1 and est.level == 2


def test_refine_exact_arithmetic(rng):
    est = RefinableEstimate(0.0, 0, 4, 8.0, 20.0, M=2)
    refine_once(est, _Constant(0.0), rng)
    assert est.mean() == 1.0
    assert est.sum == 8.0 and est.sum_sq == 20.0 and est.evals == 8


def test_refine_mean_update_formula(option, rng):
    est = sample_estimate(option, BiasLadder(8, 3), 1, rng)
    old_mean, old_count = est.mean(), est.count
    rng2 = np.random.default_rng(77)
    new = option.inner_payoff(est.outer, np.random.default_rng(77), 2 * old_count)
    refine_once(est, option, rng2)
    assert est.count == 3 * old_count
    assert est.mean() == pytest.approx(old_mean / 3 + new.sum() / (3 * old_count), rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(K=st.integers(1, 4), M=st.integers(2, 3), level=st.integers(0, 2),
       steps=st.integers(0, 20))
def test_count_bookkeeping(K, M, level, steps):
    n0 = K * M**level
    est = RefinableEstimate(0.0, level, n0, float(n0), float(n0), M=M)
    model = _Constant(1.0)
    evals = [est.evals]
    for _ in range(steps):
        # draw-free refinement: count and evals only
        extra = (M - 1) * est.count
        est.add(float(extra), float(extra), extra)
        est.echelon += 1
        evals.append(est.evals)
    assert est.count == K * M ** (level + steps)
    assert est.evals == est.count
    assert all(b > a for a, b in zip(evals, evals[1:]))
    assert est.mean() == pytest.approx(1.0)
    refine = RefinableEstimate(0.0, level, K * M**level, K * M**level, K * M**level, M=M)
    for _ in range(min(steps, 6)):
        refine_once(refine, model, np.random.default_rng(0))
    assert refine.count == K * M ** (level + min(steps, 6))


def test_cauchy_schwarz_invariant(option, rng):
    for level in range(4):
        est = sample_estimate(option, BiasLadder(2), level, rng)
        refine_once(est, option, rng)
        assert est.sum_sq >= est.sum**2 / est.count


def test_compensated_sums_survive_large_counts():
    est = RefinableEstimate(0.0, 0, 1, 1e16, 0.0)
    for _ in range(1000):
        est.add(1.0, 0.0, 1)
    assert est.sum == 1e16 + 1000


def test_copy_is_independent(option, rng):
    est = sample_estimate(option, BiasLadder(2), 1, rng)
    dup = est.copy()
    refine_once(est, option, rng)
    assert dup.count == 4 and est.count == 8
    assert "count=8" in repr(est)


def test_empirical_std_examples(option):
    assert empirical_std(RefinableEstimate(0.0, 0, 2, 4.0, 10.0)) == pytest.approx(1.0)
    assert empirical_std(RefinableEstimate(0.0, 0, 5, 15.0, 45.0)) == 0.0
    z = option.inner_payoff(0.9, np.random.default_rng(1), 10**5)
    est = RefinableEstimate(0.9, 0, z.size, z.sum(), z @ z)
    assert empirical_std(est) == pytest.approx(option.inner_std(0.9), rel=0.02)
    with pytest.raises(ValueError):
        empirical_std(RefinableEstimate(0.0, 0, 0, 0.0))


def test_empirical_std_shift_invariant(option):
    z = option.inner_payoff(1.2, np.random.default_rng(4), 1000)
    a = RefinableEstimate(1.2, 0, z.size, z.sum(), z @ z)
    w = z + 1.0
    b = RefinableEstimate(1.2, 0, w.size, w.sum(), w @ w)
    assert empirical_std(a) == pytest.approx(empirical_std(b), rel=1e-9)


def test_coupled_pair_identity(option):
    lad = BiasLadder(4, 2)
    pair = sample_coupled_pair(option, lad, 3, np.random.default_rng(8))
    rng = np.random.default_rng(8)
    y = float(option.draw_outer(rng))
    x = option.inner_payoff(y, rng, 32)
    assert pair.coarse.outer == pair.fine.outer == pair.outer == y
    assert (pair.coarse.count, pair.fine.count) == (16, 32)
    expected = pair.coarse.mean() / 2 + x[16:].sum() / 32
    assert pair.fine.mean() == pytest.approx(expected, rel=1e-14)
    assert pair.shared == 16 and pair.evals == 32
    refine_once(pair.coarse, option, rng)
    assert pair.shared == 16 and pair.evals == 48
    with pytest.raises(ValueError):
        sample_coupled_pair(option, lad, 0, rng)


def _pair_second_moment(model, lad, level, n, seed):
    rng = np.random.default_rng(seed)
    d = [p.fine.mean() - p.coarse.mean()
         for p in (sample_coupled_pair(model, lad, level, rng) for _ in range(n))]
    return float(np.mean(np.square(d)))


def test_coupling_variance_ratio(option):
    lad = BiasLadder(4, 2)
    ratio = _pair_second_moment(option, lad, 4, 10**4, 1) / _pair_second_moment(option, lad, 3, 10**4, 2)
    assert ratio == pytest.approx(0.5, abs=0.08)


def test_coupling_decay_slope(option):
    lad = BiasLadder(1, 2)
    pts = [(l, _pair_second_moment(option, lad, l, 10**4, 10 + l)) for l in range(1, 7)]
    slope = np.polyfit([p[0] for p in pts], np.log2([p[1] for p in pts]), 1)[0]
    assert slope == pytest.approx(-1, abs=0.15)


def test_coupled_marginals_match_direct_sampling(option):
    lad = BiasLadder(2)
    rng = np.random.default_rng(21)
    pairs = [sample_coupled_pair(option, lad, 2, rng) for _ in range(10**4)]
    direct = [sample_estimate(option, lad, 2, rng).mean() for _ in range(10**4)]
    fine = np.array([p.fine.mean() for p in pairs])
    coarse = np.array([p.coarse.mean() for p in pairs])
    se = math.sqrt(fine.var() / fine.size + np.var(direct) / len(direct))
    assert abs(fine.mean() - np.mean(direct)) < 4 * se
    assert abs(coarse.mean() - option.conditional_loss(np.array([p.outer for p in pairs])).mean()) \
        < 4 * coarse.std() / 100


def test_refinement_preserves_law(option):
    lad = BiasLadder(2)
    for j in (1, 2, 3):
        rng = np.random.default_rng(100 + j)
        refined = []
        for _ in range(10**4):
            est = sample_estimate(option, lad, 1, rng)
            for _ in range(j):
                refine_once(est, option, rng)
            refined.append(est.mean())
        direct = [sample_estimate(option, lad, 1 + j, rng).mean() for _ in range(10**4)]
        se = math.sqrt(np.var(refined) / 1e4 + np.var(direct) / 1e4)
        assert abs(np.mean(refined) - np.mean(direct)) < 4 * se
        assert np.var(refined) == pytest.approx(np.var(direct), rel=0.1)


def test_refinement_conditionally_unbiased(option):
    rng = np.random.default_rng(55)
    y = 0.7
    old, new = [], []
    for _ in range(10**5):
        est = RefinableEstimate(y, 0, 4, *_sums(option.inner_payoff(y, rng, 4)))
        old.append(est.mean())
        refine_once(est, option, rng)
        new.append(est.mean())
    target = option.conditional_loss(y)
    assert abs(np.mean(new) - target) < 4 * np.std(new) / math.sqrt(len(new))
    assert abs(np.mean(old) - target) < 4 * np.std(old) / math.sqrt(len(old))


def _sums(x):
    return float(x.sum()), float(x @ x)


def test_variance_scales_like_bias(option):
    lad = BiasLadder(2**14)
    rng = np.random.default_rng(6)
    y = option.draw_outer(rng, 2000)
    x = option.inner_payoff(y, rng, lad.count(0)).mean(axis=1)
    err = x - option.conditional_loss(y)
    ratio = np.mean(np.square(err)) / (lad.h0 * np.mean(np.square(option.inner_std(y))))
    assert ratio == pytest.approx(1.0, abs=0.1)


def test_block_draws_do_not_depend_on_chunking(option, monkeypatch):
    import nestedvar.sampler as sampler

    def collect():
        o = np.random.default_rng(1)
        i = np.random.default_rng(2)
        parts = list(nested_block(option, 64, 300, o, i, with_sq=True))
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]))

    whole = collect()
    monkeypatch.setattr(sampler, "MAX_BLOCK", 64 * 7)
    chunked = collect()
    for a, b in zip(whole, chunked):
        assert np.array_equal(a, b)


def test_coupled_block_matches_split_sums(option):
    o, i = np.random.default_rng(1), np.random.default_rng(2)
    outer, fs, fsq, cs, csq = next(coupled_block(option, 16, 8, 10, o, i, with_sq=True))
    o, i = np.random.default_rng(1), np.random.default_rng(2)
    y = option.draw_outer(o, 10)
    x = option.inner_payoff(y, i, 16)
    assert np.array_equal(outer, y)
    assert np.allclose(cs, x[:, :8].sum(axis=1), rtol=1e-14)
    assert np.allclose(fs, x.sum(axis=1), rtol=1e-14)
    assert np.allclose(fsq, (x * x).sum(axis=1), rtol=1e-14)
    assert np.allclose(csq, (x[:, :8] ** 2).sum(axis=1), rtol=1e-14)


def test_fit_on_coupling_is_monotone(option):
    lad = BiasLadder(2)
    v = [_pair_second_moment(option, lad, l, 4000, l) for l in (1, 2, 3)]
    assert fit_loglog([(2.0**-l, m) for l, m in zip((1, 2, 3), v)]).slope > 0.7
