import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonogram.analysis import (WeibullParams, WilcoxonResult, error_count, fit_weibull, format_p,
                               sample_discrete_weibull, time_stats, weibull_cdf, weibull_logpmf, weibull_pmf,
                               wilcoxon_signed_rank)

from oracles import brute_wilcoxon_p, sample_weibull_by_table
from oracles import weibull_cdf as cdf_oracle


def test_error_count_examples():
    b = np.random.default_rng(0).integers(0, 2, size=(5, 5))
    assert error_count(b, b) == 0
    assert error_count(b, 1 - b) == 25
    c = b.copy()
    c[2, 3] ^= 1
    assert error_count(b, c) == 1
    with pytest.raises(ValueError):
        error_count(b, b[:4])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_error_count_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.integers(0, 2, size=(4, 4)) for _ in range(3))
    assert error_count(a, b) == error_count(b, a)
    assert (error_count(a, b) == 0) == np.array_equal(a, b)
    assert error_count(a, c) <= error_count(a, b) + error_count(b, c)


def test_weibull_cdf_examples():
    assert weibull_cdf(0, WeibullParams(1, 1)) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    trained = WeibullParams(3.401227, 0.420651)
    assert weibull_cdf(0, trained) == pytest.approx(1 - math.exp(-((1 / 3.401227) ** 0.420651)), abs=1e-12)
    assert weibull_cdf(0, trained) == pytest.approx(0.449837, abs=1e-6)
    with pytest.raises(ValueError):
        WeibullParams(0, 1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.1, 5))
def test_weibull_cdf_and_pmf_properties(alpha, beta):
    p = WeibullParams(alpha, beta)
    f = np.arange(60)
    cdf = weibull_cdf(f, p)
    assert 0 < cdf[0] < 1 or cdf[0] == pytest.approx(1.0)
    assert np.all(np.diff(cdf) >= 0)
    assert np.allclose(cdf, [cdf_oracle(int(x), alpha, beta) for x in f], atol=1e-12)
    assert np.allclose(np.cumsum(weibull_pmf(f, p)), cdf, atol=1e-9)
    assert np.all(np.isfinite(weibull_logpmf(f[:5], p)) | (weibull_pmf(f[:5], p) == 0))


def test_sampler_matches_table_oracle():
    p = WeibullParams(3.4, 0.42)
    ours = sample_discrete_weibull(p, 200000, np.random.default_rng(0))
    ref = sample_weibull_by_table(3.4, 0.42, 200000, np.random.default_rng(1))
    for f in range(6):
        assert abs((ours == f).mean() - (ref == f).mean()) < 0.006
    # same uniforms give the same draws
    u_rng = np.random.default_rng(7)
    assert np.array_equal(sample_discrete_weibull(WeibullParams(1, 1), 1000, np.random.default_rng(7)),
                          sample_weibull_by_table(1, 1, 1000, u_rng, fmax=200))


@pytest.mark.parametrize("alpha, beta, tol", [(3.4, 0.42, 0.15), (1.0, 1.0, 0.10)])
def test_fit_recovers_parameters(alpha, beta, tol):
    data = sample_weibull_by_table(alpha, beta, 10000, np.random.default_rng(3))
    fit = fit_weibull(data)
    assert abs(fit.params.alpha / alpha - 1) <= tol
    assert abs(fit.params.beta / beta - 1) <= tol
    assert fit.neg_log_likelihood <= fit.initial_neg_log_likelihood
    if fit.params.beta < 1:
        assert fit.mode() == 0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.3, 3), st.integers(0, 2**32 - 1))
def test_fit_never_worse_than_initializer(alpha, beta, seed):
    data = sample_discrete_weibull(WeibullParams(alpha, beta), 300, np.random.default_rng(seed))
    if np.all(data == data[0]):
        return
    fit = fit_weibull(data)
    assert fit.neg_log_likelihood <= fit.initial_neg_log_likelihood + 1e-9
    assert fit.samples == 300


@pytest.mark.parametrize("data", [[3] * 20, [1, 2], [0, 1, -1] * 5, [0.5, 1.0] * 10])
def test_fit_rejects_degenerate_samples(data):
    with pytest.raises(ValueError):
        fit_weibull(data)


def test_time_stats_examples():
    s = time_stats([1, 2, 3])
    assert s["mean"] == 2 and s["median"] == 2 and s["std"] == 1
    c = time_stats([4.0] * 7)
    assert c["std"] == 0 and set(c["percentiles"].values()) == {4.0}
    g = time_stats(list(range(101)))
    assert g["percentiles"]["0.3"] == pytest.approx(30)
    assert list(g["percentiles"]) == [f"{0.1 * i:.1f}" for i in range(11)]
    with pytest.raises(ValueError):
        time_stats([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50))
def test_time_stats_extremes(xs):
    s = time_stats(xs)
    assert s["percentiles"]["0.0"] == min(xs) and s["percentiles"]["1.0"] == max(xs)


def test_wilcoxon_examples():
    pairs = [(i + 2.0, 1.0) for i in range(6)]
    r = wilcoxon_signed_rank(pairs)
    assert r.method == "exact" and r.n == 6 and r.p_value == pytest.approx(0.03125, abs=1e-15)
    assert r.W == 21 and r.w_minus == 0
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([(1.0, 1.0)] * 10)
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([(2.0, 1.0)] * 4 + [(1.0, 1.0)] * 10)
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(pairs, method="bootstrap")


@settings(max_examples=100, deadline=None)
@given(st.integers(5, 40), st.integers(0, 2**32 - 1))
def test_wilcoxon_antisymmetry(n, seed):
    rng = np.random.default_rng(seed)
    pairs = [(float(a), float(b)) for a, b in rng.integers(0, 6, size=(n, 2))]
    try:
        r = wilcoxon_signed_rank(pairs)
    except ValueError:
        return
    s = wilcoxon_signed_rank([(b, a) for a, b in pairs])
    assert s.signed == -r.signed and s.p_value == r.p_value
    assert r.W + r.w_minus == r.n * (r.n + 1) / 2


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 12), st.integers(0, 2**32 - 1))
def test_wilcoxon_exact_matches_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.integers(-4, 5, size=n).astype(float)  # small range, so ties and zeros occur
    if np.count_nonzero(d) < 5:
        return
    r = wilcoxon_signed_rank([(x, 0.0) for x in d], method="exact")
    assert r.p_value == pytest.approx(brute_wilcoxon_p(d), abs=1e-12)


def test_wilcoxon_normal_close_to_exact_at_n20():
    rng = np.random.default_rng(4)
    for _ in range(50):
        pairs = [(float(x), 0.0) for x in rng.normal(0.3, 1.0, size=20)]
        e = wilcoxon_signed_rank(pairs, method="exact")
        a = wilcoxon_signed_rank(pairs, method="normal")
        assert abs(e.p_value - a.p_value) <= 0.01
    assert wilcoxon_signed_rank([(float(i), 0.0) for i in range(1, 30)]).method == "normal"


def test_tiny_p_values_stay_readable():
    pairs = [(2.0 + i * 1e-3, 1.0) for i in range(5000)]
    r = wilcoxon_signed_rank(pairs)
    assert r.p_value == 0.0 and r.log10_p < -300
    text = format_p(r)
    assert "e-" in text and not text.startswith("0")
    assert format_p(WilcoxonResult(1, 1, 0, 0.25, "exact", 5, math.log10(0.25))) == "0.25"
    assert r.to_json()["log10_p"] == r.log10_p
