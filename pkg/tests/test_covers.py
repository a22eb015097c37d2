"""Random-cover sampling, fixed-point statistics, and the variance bridge."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import specvar.fuchsian as F
from specvar.covers import (
    CoverStatistics,
    NotFreePreset,
    PermutationRep,
    _batch_images,
    _power_fixed_counts,
    _word_images,
    cycle_counts,
    empirical_cover_variance,
    eval_perm,
    exact_cover_moment,
    fixed_points,
    fixed_points_of_powers,
    moment_experiment,
    sample_rep,
)
from specvar.characters import FluxCharacter
from specvar.variance import SpectrumTooShort, divisor_count, sigma2_limit
from specvar.windows import window


@pytest.fixture(scope="module")
def pants():
    return F.build_spectrum(F.preset("schottky_pants", 1.9, 2.1, 2.4), 9.0)


# ---------------------------------------------------------------------------
# sampling


def test_sample_rep_deterministic():
    a = sample_rep(2, 50, seed=7, sample_index=3)
    b = sample_rep(2, 50, seed=7, sample_index=3)
    for pa, pb in zip(a.images, b.images):
        assert np.array_equal(pa, pb)
    c = sample_rep(2, 50, seed=7, sample_index=4)
    assert any(not np.array_equal(pa, pc) for pa, pc in zip(a.images, c.images))
    assert not np.array_equal(a.images[0], a.images[1])


def test_sample_rep_degree_one_is_identity():
    rep = sample_rep(3, 1, seed=0)
    for p in rep.images:
        assert np.array_equal(p, np.array([0]))


def test_sample_rep_rejects_bad_sizes():
    with pytest.raises(ValueError):
        sample_rep(2, 0, seed=1)
    with pytest.raises(ValueError):
        sample_rep(0, 5, seed=1)


def test_permutation_rep_validates_images():
    with pytest.raises(ValueError):
        PermutationRep(n=3, images=(np.array([0, 0, 2]),), seed=0)


def test_sample_rep_uniform_on_s3():
    # all 6 permutations of S_3 equally likely: multinomial 3-SE band per cell
    n_samples = 100_000
    counts = np.zeros(6, dtype=int)
    codes = {p: i for i, p in enumerate(
        [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    )}
    for s in range(n_samples):
        rep = sample_rep(1, 3, seed=99, sample_index=s)
        counts[codes[tuple(rep.images[0].tolist())]] += 1
    p = 1.0 / 6.0
    se = math.sqrt(n_samples * p * (1 - p))
    assert np.all(np.abs(counts - n_samples * p) <= 3 * se), counts


# ---------------------------------------------------------------------------
# word evaluation and cycle structure


def test_eval_perm_three_cycle_example():
    rep = PermutationRep(n=3, images=(np.array([1, 2, 0]),), seed=0)
    assert fixed_points(rep, (1,)) == 0
    assert fixed_points(rep, (1, 1, 1)) == 3
    c = cycle_counts(rep, (1,), 3)
    assert c.tolist() == [0, 0, 1]
    assert sum(d * c[d - 1] for d in (1, 3)) == 3


def test_eval_perm_identity_word_and_inverse():
    rep = sample_rep(2, 17, seed=5)
    assert fixed_points(rep, ()) == 17
    assert fixed_points(rep, (1, -1)) == 17
    p = eval_perm(rep, (1, 2))
    q = eval_perm(rep, (-2, -1))
    assert np.array_equal(p[q], np.arange(17))


def test_eval_perm_composition_order():
    # word (1, 2) applies generator 1 then generator 2
    a = np.array([1, 0, 2])
    b = np.array([0, 2, 1])
    rep = PermutationRep(n=3, images=(a, b), seed=0)
    expect = a[b]  # out = (arange[a])[b]
    assert np.array_equal(eval_perm(rep, (1, 2)), expect)


def test_eval_perm_rejects_out_of_range_letters():
    rep = sample_rep(2, 5, seed=1)
    with pytest.raises(ValueError):
        eval_perm(rep, (3,))
    with pytest.raises(ValueError):
        eval_perm(rep, (0,))


def test_fixed_points_equals_one_cycles():
    rep = sample_rep(2, 40, seed=8)
    for w in [(1,), (2,), (1, 2), (1, -2, 1)]:
        assert fixed_points(rep, w) == cycle_counts(rep, w, 1)[0]


def test_divisor_identity_on_samples():
    # F(g^k) = sum_{d|k} d*C(g,d) exactly, via independent power counting
    rep = sample_rep(2, 60, seed=3)
    for w in [(1,), (1, 2), (2, -1, 2)]:
        f = fixed_points_of_powers(rep, w, 8)
        perm = eval_perm(rep, w)
        q = np.arange(60)
        for k in range(1, 9):
            q = q[perm] if k > 1 else perm
            assert f[k - 1] == np.count_nonzero(q == np.arange(60))


def test_class_function_on_samples():
    rep = sample_rep(2, 35, seed=12)
    for u in [(1,), (2, 1), (-1, 2, 2)]:
        w = (1, 2, -1, 2)
        conj = tuple(u) + w + tuple(-l for l in reversed(u))
        assert fixed_points(rep, conj) == fixed_points(rep, w)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=8),
    st.integers(min_value=0, max_value=1000),
)
def test_inverse_word_same_cycle_type(letters, seed):
    rep = sample_rep(2, 12, seed=seed)
    w = tuple(letters)
    inv = tuple(-l for l in reversed(letters))
    assert np.array_equal(cycle_counts(rep, w, 12), cycle_counts(rep, inv, 12))


# ---------------------------------------------------------------------------
# batch path agrees bit-exactly with the scalar path


def test_batch_matches_scalar_rows():
    rank, n, samples, seed = 2, 23, 15, 77
    images = _batch_images(rank, n, samples, seed)
    for w in [(1,), (1, 2), (-2, 1, 1)]:
        batch = _word_images(images, w)
        fbatch = _power_fixed_counts(batch, 5)
        for s in range(samples):
            rep = sample_rep(rank, n, seed, sample_index=s)
            assert np.array_equal(batch[s], eval_perm(rep, w))
            assert np.array_equal(fbatch[s], fixed_points_of_powers(rep, w, 5))


# ---------------------------------------------------------------------------
# exhaustive oracle and moment experiment


def test_exact_cover_moment_small_degrees():
    # E[F(g^k)] = #{d | k : d <= n} exactly for a uniform permutation
    for n in (1, 2, 3, 4):
        for w in [(1,), (1, 2)]:
            ex = exact_cover_moment(w, n, kmax=6)
            want = [
                sum(1 for d in range(1, k + 1) if k % d == 0 and d <= n)
                for k in range(1, 7)
            ]
            assert np.allclose(ex, want), (n, w, ex)
    with pytest.raises(ValueError):
        exact_cover_moment((1,), 5)


def test_moment_experiment_matches_exhaustive_oracle():
    st_ = moment_experiment([(1, 2)], n=3, samples=8000, seed=5, kmax=4)
    ex = exact_cover_moment((1, 2), 3, kmax=4)
    assert np.all(np.abs(st_.f_mean[0] - ex) <= 3 * st_.f_mean_se[0])


def test_moment_experiment_named_asymptotics(pants):
    prim = F.unoriented_primitives(pants)
    recs = [prim[0], prim[2]]
    st_ = moment_experiment(recs, n=100, samples=4000, seed=11, kmax=6)
    # E[F(g)] -> d(1) = 1, E[F(g^6)] -> d(6) = 4
    assert abs(st_.f_mean[0, 0] - 1.0) <= 3 * st_.f_mean_se[0, 0]
    assert abs(st_.f_mean[0, 5] - 4.0) <= 3 * st_.f_mean_se[0, 5]
    # Var[F(g)] -> V(1,1) = 1
    assert abs(st_.cov[0, 0] - 1.0) <= 3 * st_.cov_se[0, 0]
    # cross-class covariance -> 0
    assert abs(st_.cov[0, 6]) <= 3 * st_.cov_se[0, 6]
    assert st_.f_mean_target[0].tolist() == [divisor_count(k) for k in range(1, 7)]
    assert st_.cov_target[0, 6] == 0.0
    assert st_.cov_target[1, 3] == 3.0  # V(2,4) = sigma(2)
    d = st_.as_dict()
    assert d["model"] == "free"


def test_moment_experiment_cycle_means(pants):
    st_ = moment_experiment([(1,)], n=100, samples=4000, seed=2, kmax=4)
    # C(g,d) -> Poisson(1/d) means
    assert np.all(
        np.abs(st_.cycle_mean[0] - st_.cycle_mean_target[0])
        <= 3 * st_.cycle_mean_se[0] + 1e-12
    )


# ---------------------------------------------------------------------------
# empirical ensemble variance


def test_cover_variance_requires_free_preset():
    oct3 = F.build_spectrum(F.preset("octagon_genus2"), 3.0)
    with pytest.raises(NotFreePreset):
        empirical_cover_variance(
            oct3, None, window("triangle"), 100.0, 3.0, 10, 10, seed=1
        )


def test_cover_variance_requires_complete_spectrum(pants):
    with pytest.raises(SpectrumTooShort):
        empirical_cover_variance(
            pants, None, window("triangle"), 100.0, 10.0, 10, 10, seed=1
        )


def test_cover_variance_degree_one_is_zero(pants):
    rep = empirical_cover_variance(
        pants, None, window("triangle"), 100.0, 6.0, n=1, samples=50, seed=4
    )
    assert rep.estimate == 0.0
    assert rep.se == 0.0


def test_cover_variance_matches_limit(pants):
    tri = window("triangle")
    rep = empirical_cover_variance(
        pants, None, tri, lam=100.0, L=6.0, n=100, samples=4000, seed=21
    )
    assert rep.sigma2_limit == sigma2_limit(pants, None, tri, 100.0, 6.0).sigma2
    assert abs(rep.estimate - rep.sigma2_limit) <= 3 * rep.se
    assert rep.agrees
    assert rep.ci_low <= rep.estimate <= rep.ci_high


def test_cover_variance_flux_character(pants):
    tri = window("triangle")
    chi = FluxCharacter(flux=(0.7, 0.3))
    rep = empirical_cover_variance(
        pants, chi, tri, lam=100.0, L=6.0, n=100, samples=4000, seed=31
    )
    assert abs(rep.estimate - rep.sigma2_limit) <= 3 * rep.se


def test_cover_variance_centering_shift_invariance(pants):
    tri = window("triangle")
    kw = dict(lam=100.0, L=6.0, n=50, samples=500, seed=9)
    a = empirical_cover_variance(pants, None, tri, **kw, centering="batch")
    b = empirical_cover_variance(pants, None, tri, **kw, centering="dk")
    # centering shifts every sample by the same constant; variance unmoved
    assert a.estimate == b.estimate
    with pytest.raises(ValueError):
        empirical_cover_variance(pants, None, tri, **kw, centering="median")


def test_cover_variance_deterministic(pants):
    tri = window("triangle")
    kw = dict(lam=100.0, L=6.0, n=50, samples=500, seed=9)
    a = empirical_cover_variance(pants, None, tri, **kw)
    b = empirical_cover_variance(pants, None, tri, **kw)
    assert a.as_dict() == b.as_dict()
