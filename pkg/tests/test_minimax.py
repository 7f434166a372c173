import pytest

from shadowprice.instances import random_fan_instance
from shadowprice.minimax import (
    GridSpec,
    brute_force_minimax,
    check_saddle_equivalence,
)
from shadowprice.dual import shadow_price_pipeline
from shadowprice.primal import solve_primal
from shadowprice.tree import ModelError


def test_grid_spec_validation():
    with pytest.raises(ModelError):
        GridSpec(s_points=1)
    with pytest.raises(ModelError):
        GridSpec(gamma_points=1)


def test_budget_guard():
    bundle = random_fan_instance(0, 4)
    with pytest.raises(ModelError, match="budget"):
        brute_force_minimax(bundle.problem, GridSpec(s_points=20, gamma_points=41, budget=100))


def test_order_and_agreement_two_leaf():
    for seed in range(6):
        bundle = random_fan_instance(seed, 2)
        lam = solve_primal(bundle.problem).lambda_
        res = brute_force_minimax(
            bundle.problem, GridSpec(s_points=7, gamma_interval=(-3, 3), gamma_points=121)
        )
        assert res.supinf <= res.infsup + 1e-12
        assert abs(res.supinf - lam) <= res.tolerance
        assert abs(res.infsup - lam) <= res.tolerance


def test_corner_identity():
    # the inner infimum over prices lands on the trading-side corner, so it
    # reproduces the frictional wealth utility exactly at every grid gamma
    for seed in (0, 1, 2):
        bundle = random_fan_instance(seed, 3)
        res = brute_force_minimax(
            bundle.problem, GridSpec(s_points=5, gamma_interval=(-2, 2), gamma_points=41)
        )
        assert res.corner_identity_gap <= 1e-10


def test_argmin_price_lies_in_band():
    bundle = random_fan_instance(4, 2)
    res = brute_force_minimax(bundle.problem, GridSpec(s_points=9))
    market = bundle.problem.market
    for n in bundle.problem.tree.nodes:
        v = res.argmin_s.at(n.id)
        assert market.bid.at(n.id) - 1e-12 <= v <= market.ask.at(n.id) + 1e-12


def test_saddle_equivalence_at_solved_pair():
    for seed in (0, 3):
        bundle = random_fan_instance(seed, 2)
        sol = solve_primal(bundle.problem)
        _, cert = shadow_price_pipeline(bundle.problem)
        rep = check_saddle_equivalence(
            bundle.problem,
            cert.s_star,
            sol.gamma_star,
            GridSpec(s_points=9, gamma_interval=(-2, 2), gamma_points=81),
        )
        assert rep.saddle_holds(1e-6)
        assert rep.optimality_holds(1e-6)
