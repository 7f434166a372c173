import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowprice.utility import (
    NEG_INF,
    AlmostConvergentSequence,
    ConfigurationError,
    ScalarUtility,
    banach_limit,
    conjugate,
    conjugate_deriv,
    conjugate_deriv2,
)

UTILITIES = [
    ScalarUtility("log"),
    ScalarUtility("power", 0.3),
    ScalarUtility("power", 0.7),
    ScalarUtility("exp", 1.5),
    ScalarUtility("linear"),
]

DIFFERENTIABLE = [u for u in UTILITIES if u.kind != "linear"]

positive = st.floats(min_value=1e-3, max_value=1e3)


def test_parameter_validation():
    with pytest.raises(ConfigurationError):
        ScalarUtility("power", 1.2)
    with pytest.raises(ConfigurationError):
        ScalarUtility("exp", -1.0)
    with pytest.raises(ConfigurationError):
        ScalarUtility("gaussian")


def test_domain_conventions():
    assert ScalarUtility("log")(-1.0) == NEG_INF
    assert ScalarUtility("power", 0.5)(0.0) == NEG_INF
    assert math.isfinite(ScalarUtility("exp", 1.0)(-5.0))
    assert ScalarUtility("linear")(-5.0) == -5.0


@given(positive, positive)
@settings(max_examples=200)
def test_concavity_midpoint(a, b):
    for u in UTILITIES:
        mid = u(0.5 * (a + b))
        assert mid >= 0.5 * (u(a) + u(b)) - 1e-9 * max(1.0, abs(mid))


@given(positive, positive)
@settings(max_examples=200)
def test_monotonicity(a, b):
    lo, hi = min(a, b), max(a, b)
    for u in UTILITIES:
        assert u(hi) >= u(lo) - 1e-12


@given(positive)
@settings(max_examples=200)
def test_deriv_matches_finite_difference(y):
    h = 1e-6 * max(1.0, y)
    for u in DIFFERENTIABLE:
        num = (u(y + h) - u(y - h)) / (2 * h)
        assert u.deriv(y) == pytest.approx(num, rel=1e-4, abs=1e-8)


@given(positive, positive)
@settings(max_examples=300)
def test_fenchel_inequality(x, y):
    # V(x) = inf_y (x*y - U(y)) <= x*y - U(y) for every y
    for u in DIFFERENTIABLE:
        assert conjugate(u, x) <= x * y - u(y) + 1e-9 * max(1.0, abs(x * y))


@given(positive)
@settings(max_examples=200)
def test_conjugate_derivatives_numeric(x):
    h = 1e-6 * max(1.0, x)
    for u in DIFFERENTIABLE:
        d1 = (conjugate(u, x + h) - conjugate(u, x - h)) / (2 * h)
        assert conjugate_deriv(u, x) == pytest.approx(d1, rel=1e-4, abs=1e-8)
        d2 = (conjugate_deriv(u, x + h) - conjugate_deriv(u, x - h)) / (2 * h)
        assert conjugate_deriv2(u, x) == pytest.approx(d2, rel=1e-3, abs=1e-6)


def test_conjugate_of_linear_is_indicator():
    u = ScalarUtility("linear")
    assert conjugate(u, 1.0) == 0.0
    assert conjugate(u, 0.5) == NEG_INF
    assert conjugate(u, 2.0) == NEG_INF


def test_conjugate_attains_at_marginal():
    # the infimum over y is attained where U'(y) = x
    for u in DIFFERENTIABLE:
        for x in (0.3, 1.0, 2.5):
            if u.kind == "log":
                y_star = 1.0 / x
            elif u.kind == "power":
                y_star = x ** (1.0 / (u.param - 1.0))
            else:
                y_star = -math.log(x) / u.param
            assert conjugate(u, x) == pytest.approx(x * y_star - u(y_star), abs=1e-12)


# -- Banach limit ---------------------------------------------------------


seq_st = st.tuples(
    st.lists(st.floats(-10, 10), max_size=4).map(tuple),
    st.lists(st.floats(-10, 10), min_size=1, max_size=5).map(tuple),
).map(lambda t: AlmostConvergentSequence(*t))


def test_term_indexing():
    s = AlmostConvergentSequence((9.0,), (-1.0, 2.0))
    assert [s.term(k) for k in range(6)] == [9.0, -1.0, 2.0, -1.0, 2.0, -1.0]


@given(seq_st)
@settings(max_examples=200)
def test_banach_limit_shift_invariant(s):
    assert banach_limit(s.shift()) == pytest.approx(banach_limit(s), abs=1e-12)


@given(seq_st, st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=200)
def test_banach_limit_affine(s, a, b):
    lim = banach_limit(s)
    assert banach_limit(s.scale(a)) == pytest.approx(a * lim, abs=1e-9)
    assert banach_limit(s.offset(b)) == pytest.approx(lim + b, abs=1e-9)


@given(seq_st)
@settings(max_examples=200)
def test_banach_limit_between_bounds(s):
    lo = min(s.period)
    hi = max(s.period)
    lim = banach_limit(s)
    assert lo - 1e-12 <= lim <= hi + 1e-12


def test_banach_limit_matches_cesaro_tail():
    s = AlmostConvergentSequence((5.0, -5.0), (1.0, 2.0, 3.0))
    n = 3 * 10**5
    cesaro = sum(s.term(k) for k in range(n)) / n
    assert banach_limit(s) == pytest.approx(cesaro, abs=1e-4)


def test_constant_sequence():
    assert banach_limit(AlmostConvergentSequence.constant(4.2)) == 4.2
