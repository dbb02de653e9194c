import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from bclab.logspace import (
    lp_complement,
    lp_complement_array,
    lp_from_prob,
    lp_pow,
    lp_pow_complement,
    lp_pow_complement_array,
)


def test_from_prob_examples():
    assert lp_from_prob(1.0) == 0.0
    assert lp_from_prob(0.0) == -math.inf
    assert lp_from_prob(0.5) == pytest.approx(-0.6931471805599453, abs=1e-12)


@pytest.mark.parametrize("p", [-0.1, 1.0000001, math.nan])
def test_from_prob_rejects(p):
    with pytest.raises(ValueError):
        lp_from_prob(p)


@pytest.mark.parametrize("p", [0.0, 1e-300, 1e-12, 0.3, 0.5, 0.999, 1.0])
def test_round_trip(p):
    back = math.exp(lp_from_prob(p))
    # log p is correctly rounded; exp turns its half-ulp into |log p| * eps
    eps = np.finfo(float).eps
    assert back == pytest.approx(p, rel=eps * max(1.0, abs(math.log(p or 1.0))), abs=0.0)
    if p in (0.0, 1.0):
        assert back == p


def test_complement_examples():
    assert lp_complement(-math.inf) == 0.0
    assert lp_complement(math.log(0.5)) == pytest.approx(math.log(0.5), abs=1e-15)
    assert lp_complement(0.0) == -math.inf
    # mpmath: log(-expm1(-1e-18)) = -41.446531673892822312...
    assert lp_complement(-1e-18) == pytest.approx(-41.44653167389282, rel=1e-6)


@pytest.mark.parametrize("x", [-1e-300, -1e-18, -1e-9, -0.1, -0.69, -0.7, -1.0, -5.0, -40.0, -700.0])
def test_complement_against_mpmath(x):
    mp.mp.dps = 60
    ref = float(mp.log(-mp.expm1(mp.mpf(x))))
    assert lp_complement(x) == pytest.approx(ref, rel=1e-14, abs=1e-300)


def test_complement_array_matches_scalar():
    xs = np.concatenate((-np.geomspace(1e-20, 50, 400), [0.0, -math.inf]))
    got = lp_complement_array(xs)
    want = [lp_complement(x) for x in xs]
    np.testing.assert_allclose(got, want, rtol=4e-16, atol=0)


@given(st.floats(min_value=-40.0, max_value=-1e-12))
def test_complement_involution(x):
    assert lp_complement(lp_complement(x)) == pytest.approx(x, abs=1e-12)


@given(st.floats(min_value=-700.0, max_value=0.0), st.floats(min_value=-700.0, max_value=0.0))
def test_complement_monotone(x, y):
    x, y = min(x, y), max(x, y)
    assert lp_complement(x) >= lp_complement(y)


def test_pow_examples():
    assert lp_pow(math.log(0.5), math.log(2.0)) == pytest.approx(math.log(0.25), abs=1e-15)
    for m_log in (-5.0, 0.0, 10.0, 1e6):
        assert lp_pow(0.0, m_log) == 0.0
    assert lp_pow(-1e-3, 1e4) == -math.inf
    assert lp_pow(-math.inf, 3.0) == -math.inf


@pytest.mark.parametrize("m_log", [0.0, 1.0, 5.0, 20.0, 35.0])
@pytest.mark.parametrize("log_tail", [-0.5, -3.0, -15.0, -30.0])
def test_fused_matches_naive_where_representable(m_log, log_tail):
    naive = math.exp(m_log) * math.log1p(-math.exp(log_tail))
    assert lp_pow_complement(log_tail, m_log) == pytest.approx(naive, rel=1e-13)
    assert lp_pow(lp_complement(log_tail), m_log) == pytest.approx(naive, rel=1e-13)


def test_fused_beyond_float_range():
    # m = e^167, y = e^-166: m log(1 - y) = -e (1 + e^-166 / 2 + ...)
    assert lp_pow_complement(-166.0, 167.0) == pytest.approx(-math.e, rel=1e-15)
    assert lp_pow_complement(-10.0, 1000.0) == -math.inf
    assert lp_pow_complement(-math.inf, 1000.0) == 0.0
    arr = lp_pow_complement_array(np.array([-166.0, -0.5]), np.array([167.0, 2.0]))
    assert arr[0] == pytest.approx(-math.e, rel=1e-15)
    assert arr[1] == pytest.approx(math.exp(2.0) * math.log1p(-math.exp(-0.5)), rel=1e-14)
