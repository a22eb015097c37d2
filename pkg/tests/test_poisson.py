"""Poisson surrogate: cumulants, CLT behavior, and energy-window ergodicity."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import poisson as poisson_dist

import specvar.fuchsian as F
from specvar.characters import FluxCharacter
from specvar.poisson import (
    CumulantReport,
    PoissonSurrogate,
    VarianceTooSmall,
    _poisson_cdf,
    clt_test,
    ergodicity_experiment,
    exact_cumulants,
    sample_Ninfty,
    sample_cycle_counts,
)
from specvar.variance import SpectrumTooShort, UnderResolved, divisor_count, gcd_weight, sigma2_limit
from specvar.windows import Window, sigma2_goe, sigma2_gue, window


@pytest.fixture(scope="module")
def pants():
    return F.build_spectrum(F.preset("schottky_pants", 1.9, 2.1, 2.4), 9.0)


@pytest.fixture(scope="module")
def pants_sur(pants):
    return PoissonSurrogate(pants, None, window("triangle"), lam=1e4, L=8.0, seed=3)


# ---------------------------------------------------------------------------
# Poisson inversion


def test_poisson_cdf_matches_scipy():
    for d in (1, 2, 3, 7):
        cdf = _poisson_cdf(d)
        want = poisson_dist.cdf(np.arange(len(cdf)), 1.0 / d)
        assert np.allclose(cdf, want, rtol=0, atol=1e-14)


def test_cycle_count_draws_match_poisson_moments():
    draws = 40000
    z = sample_cycle_counts(seed=5, class_id=9, dmax=4, draws=draws)
    for d in range(1, 5):
        mu = 1.0 / d
        se = math.sqrt(mu / draws)
        assert abs(z[:, d - 1].mean() - mu) <= 3 * se
        # Poisson variance equals the mean
        var_se = math.sqrt((mu + 2 * mu**2) / draws)
        assert abs(z[:, d - 1].var(ddof=1) - mu) <= 4 * var_se


def test_cycle_count_draws_deterministic():
    a = sample_cycle_counts(seed=5, class_id=9, dmax=3, draws=100)
    b = sample_cycle_counts(seed=5, class_id=9, dmax=3, draws=100)
    assert np.array_equal(a, b)
    c = sample_cycle_counts(seed=5, class_id=10, dmax=3, draws=100)
    assert not np.array_equal(a, c)


def test_f_infty_moments_match_limit_law():
    # the surrogate IS the large-degree law: means d(k), covariances V(k1,k2)
    draws, kmax = 60000, 6
    z = sample_cycle_counts(seed=11, class_id=42, dmax=kmax, draws=draws)
    f = np.zeros((draws, kmax))
    for k in range(1, kmax + 1):
        for d in range(1, k + 1):
            if k % d == 0:
                f[:, k - 1] += d * z[:, d - 1]
    means = f.mean(axis=0)
    ses = f.std(axis=0, ddof=1) / math.sqrt(draws)
    for k in range(1, kmax + 1):
        assert abs(means[k - 1] - divisor_count(k)) <= 3 * ses[k - 1]
    cov = np.cov(f.T)
    for k1, k2 in [(1, 1), (1, 2), (2, 4), (6, 6), (2, 3)]:
        se = math.sqrt(
            np.mean(
                (f[:, k1 - 1] - means[k1 - 1]) ** 2 * (f[:, k2 - 1] - means[k2 - 1]) ** 2
            )
            / draws
        )
        assert abs(cov[k1 - 1, k2 - 1] - gcd_weight(k1, k2)) <= 3 * se + 1e-12


# ---------------------------------------------------------------------------
# surrogate construction and sampling


def test_surrogate_requires_complete_spectrum(pants):
    with pytest.raises(SpectrumTooShort):
        PoissonSurrogate(pants, None, window("triangle"), 100.0, 10.0, seed=1)


def test_sample_mean_and_variance(pants_sur):
    vals = pants_sur.sample(30000)
    k = exact_cumulants(pants_sur, 4).kappa
    assert abs(vals.mean()) <= 3 * vals.std() / math.sqrt(len(vals))
    var_se = math.sqrt((k[2] + 2 * k[0] ** 2) / len(vals))
    assert abs(vals.var(ddof=1) - k[0]) <= 3 * var_se


def test_sample_prefix_stable(pants_sur):
    long = pants_sur.sample(50)
    short = pants_sur.sample(7)
    assert np.array_equal(short, long[:7])
    assert sample_Ninfty(pants_sur) == long[0]
    with pytest.raises(ValueError):
        pants_sur.sample(0)


def test_sample_deterministic_across_instances(pants):
    a = PoissonSurrogate(pants, None, window("triangle"), 1e4, 8.0, seed=3)
    b = PoissonSurrogate(pants, None, window("triangle"), 1e4, 8.0, seed=3)
    assert np.array_equal(a.sample(20), b.sample(20))
    c = PoissonSurrogate(pants, None, window("triangle"), 1e4, 8.0, seed=4)
    assert not np.array_equal(a.sample(20), c.sample(20))


# ---------------------------------------------------------------------------
# exact cumulants


@pytest.mark.parametrize(
    "char,win",
    [
        (None, Window("triangle")),
        (None, Window("smooth_bump", amplitude=2.0)),
        (FluxCharacter(flux=(0.8, 0.4)), Window("triangle")),
    ],
)
def test_kappa2_equals_limiting_variance(pants, char, win):
    sur = PoissonSurrogate(pants, char, win, lam=1e4, L=8.0, seed=1)
    rep = exact_cumulants(sur, mmax=4)
    assert rep.kappa2_matches, rep.kappa2_rel_err
    assert rep.kappa2_rel_err <= 1e-9
    assert rep.sigma2_ref == sigma2_limit(pants, char, win, 1e4, 8.0).sigma2


def test_single_class_single_k_cumulants(pants):
    # only the 1.9-geodesic survives below L=2; kmax=1 so kappa_m = c^m
    short = F.truncate_spectrum(pants, 2.0)
    sur = PoissonSurrogate(short, None, window("triangle"), lam=50.0, L=2.0, seed=1)
    assert sur.n_pairs == 1
    rep = exact_cumulants(sur, mmax=5)
    c = sur.pair_c[0]
    assert np.allclose(rep.kappa, [c**2, c**3, c**4, c**5], rtol=1e-14)


def test_cumulant_bounds_dominate(pants_sur):
    rep = exact_cumulants(pants_sur, mmax=5)
    assert np.all(np.abs(rep.kappa) <= rep.bounds + 1e-15)
    assert rep.mmax == 5
    assert len(rep.kappa) == 4
    with pytest.raises(ValueError):
        exact_cumulants(pants_sur, mmax=1)
    d = rep.as_dict()
    assert d["kappa2Matches"] is True


# ---------------------------------------------------------------------------
# central limit test


def test_clt_refuses_small_variance(pants):
    short = F.truncate_spectrum(pants, 2.0)
    sur = PoissonSurrogate(short, None, window("triangle"), lam=50.0, L=2.0, seed=1)
    with pytest.raises(VarianceTooSmall):
        clt_test(sur, draws=1000)


def test_clt_moments_match_cumulant_targets(pants_sur):
    rep = clt_test(pants_sur, draws=20000)
    assert rep.skewness_pass
    assert rep.kurtosis_pass
    assert abs(rep.mean) <= 3 * rep.mean_se
    assert 0.0 <= rep.ks_stat <= 1.0
    d = rep.as_dict()
    assert d["draws"] == 20000
    with pytest.raises(ValueError):
        clt_test(pants_sur, draws=4)


# ---------------------------------------------------------------------------
# ergodicity experiment


def test_ergodicity_rejects_small_eps(pants_sur):
    with pytest.raises(ValueError):
        ergodicity_experiment(pants_sur, 100.0, 50.0, None, 10, eps=0.5)


def test_ergodicity_underresolved(pants_sur):
    eps = math.sqrt(10.0 * (1 / 8.0 + 1 / 50.0)) + 0.01
    with pytest.raises(UnderResolved):
        ergodicity_experiment(pants_sur, 100.0, 50.0, 20, 10, eps=eps)


def test_ergodicity_huge_eps_never_violates(pants_sur):
    rep = ergodicity_experiment(pants_sur, 100.0, 25.0, None, 50, eps=100.0)
    assert rep.fraction == 0.0
    assert rep.target == sigma2_goe(window("triangle"))


def test_ergodicity_gue_target_under_flux(pants):
    chi = FluxCharacter(flux=(math.pi / 2, 0.0))
    sur = PoissonSurrogate(pants, chi, window("triangle"), 1e4, 8.0, seed=5)
    rep = ergodicity_experiment(sur, 1e4, 25.0, None, 50, eps=100.0)
    assert rep.target == sigma2_gue(window("triangle"))


def test_ergodicity_fraction_nonincreasing(octagon12):
    # fixed eps (binding precondition at the smallest span); identical Z
    # draws across spans make the comparison paired
    sur = PoissonSurrogate(octagon12, None, window("triangle"), 1e4, 10.0, seed=17)
    eps = math.sqrt(10.0 * (1 / 10.0 + 1 / 25.0)) * 1.0001
    fracs = [
        ergodicity_experiment(sur, 1e4, span, None, 400, eps).fraction
        for span in (25.0, 50.0, 100.0)
    ]
    assert all(f <= 0.1 for f in fracs)
    assert fracs[0] >= fracs[1] >= fracs[2]


def test_ergodicity_report_fields(pants_sur):
    rep = ergodicity_experiment(pants_sur, 500.0, 25.0, None, 20, eps=50.0)
    d = rep.as_dict()
    assert d["draws"] == 20
    assert d["epsilon"] == 50.0
    assert rep.energy_points >= 9
