import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from failsim.dist import (
    Deterministic,
    DistributionError,
    Exponential,
    FiniteMixture,
    NonIntegrableError,
    Pareto,
    TailClass,
    TailVerdict,
    Weibull,
    classify_tail,
    compare_tails,
    format_distribution,
    parse_distribution,
)
from failsim.rng import CounterStream


def family_strategy(bounded=True):
    pos = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)
    shape_ok = st.floats(min_value=1.2, max_value=6.0, allow_nan=False)
    options = [
        st.builds(Exponential, pos),
        st.builds(Pareto, pos, shape_ok),
        st.builds(Weibull, pos, st.floats(min_value=0.4, max_value=4.0)),
    ]
    if bounded:
        options.append(st.builds(Deterministic, pos))
    return st.one_of(*options)


@settings(max_examples=60, deadline=None)
@given(family_strategy(), st.floats(min_value=0.0, max_value=50.0))
def test_tail_basic_invariants(d, z):
    t = float(d.tail(z))
    assert 0.0 <= t <= 1.0
    assert float(d.tail(0.0)) == pytest.approx(1.0) or isinstance(d, Deterministic)
    # non-increasing
    assert float(d.tail(z + 1.0)) <= t + 1e-12


@settings(max_examples=40, deadline=None)
@given(family_strategy())
def test_mean_matches_tail_quadrature(d):
    if isinstance(d, Deterministic):
        assert d.mean() == pytest.approx(d.value)
        return
    val, _ = integrate.quad(lambda z: float(d.tail(z)), 0, np.inf, limit=400)
    assert val == pytest.approx(d.mean(), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(family_strategy(), st.floats(min_value=0.01, max_value=30.0))
def test_truncated_mean_monotone_and_bounded(d, z):
    tm = float(d.truncated_mean(z))
    assert 0.0 <= tm <= d.mean() + 1e-12
    assert float(d.truncated_mean(z + 1.0)) >= tm - 1e-12


def test_truncated_mean_converges_to_mean():
    for d in (Exponential(2.0), Pareto(1.0, 3.0), Weibull(1.5, 0.8)):
        assert float(d.truncated_mean(1e4)) == pytest.approx(d.mean(), rel=1e-6)


@pytest.mark.parametrize(
    "d,z,expect",
    [
        (Exponential(2.0), 1.0, math.exp(-2.0)),
        (Pareto(1.0, 2.0), 2.0, 0.25),
        (Deterministic(3.0), 2.0, 1.0),
        (Deterministic(3.0), 3.0, 0.0),
    ],
)
def test_tail_closed_forms(d, z, expect):
    assert float(d.tail(z)) == pytest.approx(expect, abs=1e-12)


def test_truncated_mean_tail_identity():
    # E[X 1{X<=z}] = mean - E[X 1{X>z}], the latter by quadrature
    for d in (Exponential(1.5), Pareto(2.0, 2.5), Weibull(1.0, 2.0)):
        for z in (0.5, 2.0, 7.0):
            upper, _ = integrate.quad(
                lambda s: float(d.tail(s)), z, np.inf, limit=400
            )
            expect = d.mean() - (z * float(d.tail(z)) + upper)
            assert float(d.truncated_mean(z)) == pytest.approx(expect, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(family_strategy(), st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_quantile_isf_consistency(d, w):
    q = float(d.quantile(w))
    assert float(d.isf(1.0 - w)) == pytest.approx(q, rel=1e-9, abs=1e-9)
    if not isinstance(d, Deterministic):
        assert float(d.cdf(q)) == pytest.approx(w, abs=1e-9)


def test_sampling_matches_mean_or_median():
    stream = CounterStream(seed=99)
    n = 10**6
    for d in (Exponential(0.7), Weibull(2.0, 1.5), Pareto(1.0, 4.0)):
        xs = d.sample_n(stream, n)
        se = xs.std() / math.sqrt(n)
        assert abs(xs.mean() - d.mean()) < 4 * se
    # infinite-variance case: compare median against quantile(1/2)
    d = Pareto(1.0, 2.0)
    xs = d.sample_n(stream, n)
    assert np.median(xs) == pytest.approx(float(d.quantile(0.5)), rel=0.01)


def test_mixture_weights_and_tail():
    m = FiniteMixture((0.25, 0.75), (Exponential(1.0), Exponential(3.0)))
    assert sum(m.weights) == pytest.approx(1.0, abs=1e-12)
    z = 1.3
    expect = 0.25 * math.exp(-z) + 0.75 * math.exp(-3 * z)
    assert float(m.tail(z)) == pytest.approx(expect, rel=1e-12)
    assert m.mean() == pytest.approx(0.25 * 1.0 + 0.75 / 3.0, rel=1e-12)


def test_mixture_bad_weights_rejected():
    with pytest.raises(DistributionError):
        FiniteMixture((0.5, 0.6), (Exponential(1.0), Exponential(2.0)))


def test_pareto_nonintegrable_mean():
    with pytest.raises(NonIntegrableError):
        Pareto(1.0, 1.0).mean()
    with pytest.raises(NonIntegrableError):
        Pareto(1.0, 0.5).mean()


def test_classify_tail():
    assert classify_tail(Exponential(0.2)) is TailClass.LIGHT
    assert classify_tail(Weibull(1.0, 2.0)) is TailClass.LIGHT
    assert classify_tail(Pareto(1.0, 3.0)) is TailClass.HEAVY
    assert classify_tail(Weibull(1.0, 0.5)) is TailClass.HEAVY


@settings(max_examples=40, deadline=None)
@given(family_strategy(bounded=False), family_strategy(bounded=False))
def test_compare_tails_mirror(v, w):
    mirror = {
        TailVerdict.FIRST_HEAVIER: TailVerdict.SECOND_HEAVIER,
        TailVerdict.FIRST_STRICT_HEAVIER: TailVerdict.SECOND_STRICT_HEAVIER,
        TailVerdict.SECOND_HEAVIER: TailVerdict.FIRST_HEAVIER,
        TailVerdict.SECOND_STRICT_HEAVIER: TailVerdict.FIRST_STRICT_HEAVIER,
        TailVerdict.EQUAL: TailVerdict.EQUAL,
        TailVerdict.INCONCLUSIVE: TailVerdict.INCONCLUSIVE,
    }
    assert compare_tails(w, v).verdict is mirror[compare_tails(v, w).verdict]


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.2, max_value=5.0),
    st.floats(min_value=0.05, max_value=0.95),
)
def test_compare_exponentials_strict(a, frac):
    b = a * frac  # b < a, so Exponential(b) has the heavier tail
    cmp = compare_tails(Exponential(a), Exponential(b))
    assert cmp.verdict is TailVerdict.SECOND_STRICT_HEAVIER
    assert cmp.witness_epsilon <= b / a + 1e-9


def test_compare_equal_laws():
    cmp = compare_tails(Exponential(1.0), Exponential(1.0))
    assert cmp.verdict is TailVerdict.EQUAL
    assert cmp.first_heavier  # equality counts as heavier-or-equal


def test_pareto_heavier_than_exponential():
    cmp = compare_tails(Pareto(1.0, 2.0), Exponential(1.0))
    assert cmp.verdict is TailVerdict.FIRST_STRICT_HEAVIER
    assert cmp.first_heavier


@settings(max_examples=80, deadline=None)
@given(family_strategy())
def test_parse_format_roundtrip(d):
    again = parse_distribution(format_distribution(d))
    assert format_distribution(again) == format_distribution(d)
    for z in (0.3, 1.7, 9.0):
        assert float(again.tail(z)) == pytest.approx(float(d.tail(z)), rel=1e-12)


@pytest.mark.parametrize(
    "text",
    ["exp(2)", "pareto(1,2)", "weibull(2,0.5)", "det(4)",
     "mix(0.5*exp(1),0.5*det(2))"],
)
def test_parse_known_syntax(text):
    parse_distribution(text)


@pytest.mark.parametrize("text", ["exp()", "exp(-1)", "gauss(0,1)", "mix()", "exp(2"])
def test_parse_rejects_garbage(text):
    with pytest.raises(DistributionError):
        parse_distribution(text)
