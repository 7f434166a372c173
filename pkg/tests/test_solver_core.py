import numpy as np
import pytest

from shadowprice.solver_core import (
    STATUS_OPTIMAL,
    BarrierOptions,
    minimize_barrier,
)


def quad(center, weight=None):
    c = np.asarray(center, dtype=float)
    w = np.ones_like(c) if weight is None else np.asarray(weight, dtype=float)

    def f(x):
        d = x - c
        return float(0.5 * d @ (w * d)), w * d, np.diag(w)

    return f


def test_unconstrained_interior_optimum():
    f = quad([0.3, -0.2])
    G = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    h = np.array([5.0, 5.0, 5.0, 5.0])
    res = minimize_barrier(f, np.zeros(2), G, h)
    assert res.status == STATUS_OPTIMAL
    assert res.x == pytest.approx([0.3, -0.2], abs=1e-7)
    assert res.value == pytest.approx(0.0, abs=1e-10)


def test_active_constraint_and_multiplier():
    # min (x-3)^2 / 2 s.t. x <= 1: optimum at 1, multiplier 2
    f = quad([3.0])
    G = np.array([[1.0]])
    h = np.array([1.0])
    res = minimize_barrier(f, np.array([0.0]), G, h)
    assert res.status == STATUS_OPTIMAL
    assert res.x[0] == pytest.approx(1.0, abs=1e-7)
    assert res.ineq_multipliers[0] == pytest.approx(2.0, rel=1e-4)


def test_equality_constraints_respected():
    # min |x|^2 / 2 s.t. x1 + x2 = 2 inside a big box: optimum (1, 1)
    f = quad([0.0, 0.0])
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.full(4, 10.0)
    A = np.array([[1.0, 1.0]])
    b = np.array([2.0])
    res = minimize_barrier(f, np.array([0.5, 1.5]), G, h, A, b)
    assert res.status == STATUS_OPTIMAL
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-7)
    assert float((A @ res.x - b)[0]) == pytest.approx(0.0, abs=1e-10)


def test_infeasible_start_rejected():
    f = quad([0.0])
    G = np.array([[1.0]])
    h = np.array([1.0])
    with pytest.raises(ValueError):
        minimize_barrier(f, np.array([2.0]), G, h)


def test_gap_bound_certifies_value():
    f = quad([2.0, 2.0], [1.0, 4.0])
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.array([1.0, 1.5, 0.0, 0.0])  # 0 <= x1 <= 1, 0 <= x2 <= 1.5
    res = minimize_barrier(f, np.array([0.5, 0.5]), G, h)
    assert res.status == STATUS_OPTIMAL
    truth = 0.5 * ((1 - 2) ** 2 + 4 * (1.5 - 2) ** 2)
    assert res.value == pytest.approx(truth, abs=max(res.gap_bound, 1e-9))
    assert res.gap_bound <= BarrierOptions().tol_gap


def test_nonnegative_multipliers():
    f = quad([5.0, -5.0])
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.full(4, 1.0)
    res = minimize_barrier(f, np.zeros(2), G, h)
    assert np.all(res.ineq_multipliers >= 0)
    # complementary slackness within the barrier's m/t bound
    s = h - G @ res.x
    assert float(res.ineq_multipliers @ s) <= 10 * res.gap_bound + 1e-12
