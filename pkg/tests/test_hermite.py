import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermwave.hermite import (HermiteExpansion, NotCenteredError, builtin_filter, gauss_nodes,
                              hermite_coeffs, hermite_eval, subordinate)

from oracles import hermite_coeff_quad


def test_hermite_eval_examples():
    assert hermite_eval(2, 2.0) == 3.0
    assert hermite_eval(1, 7.3) == 7.3
    assert hermite_eval(0, 5.0) == 1.0
    assert hermite_eval(5, 1.5) == pytest.approx(1.5**5 - 10 * 1.5**3 + 15 * 1.5, rel=1e-14)
    assert hermite_eval(5, 1.5) == pytest.approx(-3.65625, rel=1e-14)


@given(st.integers(0, 12), st.floats(-5, 5))
def test_hermite_eval_matches_numpy(q, x):
    from numpy.polynomial import hermite_e
    c = np.zeros(q + 1)
    c[q] = 1
    ref = hermite_e.hermeval(x, c)
    assert hermite_eval(q, x) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_hermite_eval_rejects_negative_order():
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)


def test_orthogonality():
    x, w = gauss_nodes(200)
    for q in range(9):
        for p in range(9):
            val = w @ (hermite_eval(q, x) * hermite_eval(p, x))
            if p == q:
                assert abs(val / math.factorial(q) - 1) < 1e-8
            else:
                assert abs(val) < 1e-8 * math.sqrt(math.factorial(p) * math.factorial(q))


def test_coeffs_second_hermite():
    e = hermite_coeffs(lambda x: x**2 - 1)
    assert e.rank == 2
    assert e.c(2) == pytest.approx(2.0, rel=1e-12)
    assert all(e.c(q) == 0 for q in range(1, 26) if q != 2)
    assert e.l2 == pytest.approx(2.0, rel=1e-12)


def test_coeffs_cube():
    e = hermite_coeffs(lambda x: x**3)
    assert e.rank == 1
    assert e.c(1) == pytest.approx(3.0, rel=1e-12)
    assert e.c(3) == pytest.approx(6.0, rel=1e-12)
    assert all(e.c(q) == 0 for q in range(1, 26) if q not in (1, 3))


def test_coeffs_exponential():
    G = builtin_filter("exp")
    e = hermite_coeffs(G)
    assert e.rank == 1
    for q in range(1, 13):
        assert e.c(q) == pytest.approx(math.exp(0.5), rel=1e-10)
        assert e.c(q) == pytest.approx(hermite_coeff_quad(G, q), rel=1e-7)


def test_not_centered():
    with pytest.raises(NotCenteredError, match="E\\[G\\(X\\)\\]"):
        hermite_coeffs(lambda x: x**2)


def test_zero_filter_has_no_rank():
    with pytest.raises(ValueError):
        hermite_coeffs(lambda x: 0 * x)


def test_parseval_polynomial():
    G = lambda x: x**4 - 6 * x**2 + 3 + 2 * x**3
    x, w = gauss_nodes(200)
    e = hermite_coeffs(G)
    assert abs(w @ G(x) ** 2 - e.l2) < 1e-6


def test_parseval_exponential():
    G = builtin_filter("exp")
    x, w = gauss_nodes(200)
    e = hermite_coeffs(G, Q=25)
    assert abs(w @ G(x) ** 2 - e.l2) < 1e-3
    # E[(e^X - e^{1/2})^2] = e^2 - e
    assert w @ G(x) ** 2 == pytest.approx(math.e**2 - math.e, rel=1e-10)


def test_partial_sums_non_decreasing():
    e = hermite_coeffs(builtin_filter("exp"))
    terms = [e.c(q) ** 2 / math.factorial(q) for q in range(1, e.Q + 1)]
    assert np.all(np.diff(np.cumsum(terms)) >= 0)
    assert e.tail == pytest.approx(terms[-1])


@pytest.mark.parametrize("name,rank", [("identity", 1), ("cube", 1), ("exp", 1), ("H2", 2),
                                       ("H3", 3), ("H5", 5)])
def test_rank_stable_under_threshold(name, rank):
    G = builtin_filter(name)
    for tol in (1e-11, 1e-10, 1e-9):
        assert hermite_coeffs(G, tol=tol).rank == rank


def test_subordinate_examples():
    assert np.array_equal(subordinate(builtin_filter("identity"), [0.3, -1.0]), [0.3, -1.0])
    assert np.array_equal(subordinate(lambda x: x**2 - 1, [0, 1, 2]), [-1, 0, 3])


@settings(max_examples=30)
@given(st.lists(st.floats(-4, 4), min_size=1, max_size=50))
def test_subordinate_routes_agree(xs):
    e = hermite_coeffs(lambda x: x**3)
    direct = subordinate(lambda x: x**3, xs)
    chaos = subordinate(e, xs)
    assert np.allclose(chaos, direct, rtol=1e-10, atol=1e-10)


def test_json_round_trip():
    e = hermite_coeffs(lambda x: x**3, Q=6)
    obj = json.loads(e.to_json())
    assert set(obj) == {"rank", "coeffs", "l2"}
    assert obj["rank"] == 1 and len(obj["coeffs"]) == 6
    back = HermiteExpansion.from_json(e.to_json())
    assert back.coeffs == e.coeffs and back.rank == e.rank and back.l2 == e.l2


def test_builtin_filter_unknown():
    with pytest.raises(ValueError):
        builtin_filter("sqrt")
