import math

import pytest

from shadowprice.examples import ExampleDescriptor, build
from shadowprice.primal import detect_arbitrage, solve_frictionless, solve_primal
from shadowprice.relaxation import saddle_point_conditions, verify_saddle
from shadowprice.tree import ModelError, RandomVariable, conditional_expectation
from shadowprice.utility import banach_limit


def test_unknown_example_rejected():
    with pytest.raises(ModelError):
        ExampleDescriptor("example9")


# -- one-period quadrature model ------------------------------------------


def test_example3_branch_and_saddle():
    ex = build(ExampleDescriptor("example3", quad=8))
    assert ex.diagnostics["expected_bid1"] > ex.one_period.s0
    g, s1, branch = saddle_point_conditions(ex.one_period)
    assert branch == ex.diagnostics["expected_branch"] == "positive"
    rep = verify_saddle(ex.one_period, g, s1, gamma_grid=(g - 1, g + 1, 150), s_points=150)
    assert rep.passes(1e-8)


def test_example3_quadrature_refinement_is_stable():
    coarse = build(ExampleDescriptor("example3", quad=8))
    fine = build(ExampleDescriptor("example3", quad=64))
    g_c, _, _ = saddle_point_conditions(coarse.one_period)
    g_f, _, _ = saddle_point_conditions(fine.one_period)
    assert g_c == pytest.approx(g_f, rel=0.05)


# -- nontrivial initial information ---------------------------------------


def test_example4_conditional_expectation_is_two_everywhere():
    ex = build(ExampleDescriptor("example4", N=10))
    tree = ex.problem.tree
    s1 = RandomVariable(
        {leaf.id: ex.problem.market.bid.at(leaf.id) for leaf in tree.leaves()}
    )
    ce = conditional_expectation(tree, s1, 0)
    for atom in tree.layer(0):
        assert ce.at(atom.id) == pytest.approx(2.0, abs=1e-12)


def test_example4_tail_limits():
    ex = build(ExampleDescriptor("example4"))
    assert banach_limit(ex.diagnostics["tail_ds1"]) == 0.5
    assert banach_limit(ex.diagnostics["tail_one_plus_ds1"]) == 1.5


def test_example4_linear_optimum_is_one():
    for N in (5, 10, 15):
        ex = build(ExampleDescriptor("example4", N=N))
        sol = solve_primal(ex.problem)
        assert sol.lambda_ == pytest.approx(1.0, abs=1e-9)


# -- falling bids with atom-dependent asks --------------------------------


def test_example5_lambda_matches_closed_form():
    ex = build(ExampleDescriptor("example5", n=8, K=6))
    sol = solve_primal(ex.problem)
    assert sol.lambda_ == pytest.approx(ex.diagnostics["expected_lambda"], abs=1e-8)


def test_example5_gamma_matches_closed_form():
    ex = build(ExampleDescriptor("example5", n=8, K=6))
    sol = solve_primal(ex.problem)
    assert abs(sol.gamma_star.gamma.at("root")) <= 1e-6
    for atom, g in ex.diagnostics["gamma1_closed_form"].items():
        assert sol.gamma_star.gamma.at(atom) == pytest.approx(g, abs=1e-4)


def test_example5_candidate_price_admits_arbitrage():
    ex = build(ExampleDescriptor("example5"))
    cand = ex.diagnostics["candidate_price"]
    assert detect_arbitrage(ex.problem.tree, cand).arbitrage
    free = solve_frictionless(ex.problem.tree, cand, ex.problem.phi)
    assert free.status == "unbounded"


def test_example5_constrained_candidate_reproduces_lambda():
    ex = build(ExampleDescriptor("example5", n=8, K=6))
    lam = solve_primal(ex.problem).lambda_
    con = solve_frictionless(
        ex.problem.tree,
        ex.diagnostics["candidate_price"],
        ex.problem.phi,
        ex.diagnostics["short_sale_constraint"],
    )
    assert con.status == "optimal"
    assert con.lambda_ == pytest.approx(lam, abs=1e-8)


def test_example5_unscaled_value_grows_with_truncation_depth():
    # each retained atom adds a positive contribution before renormalization
    prev = -math.inf
    for K in (2, 3, 4, 5, 6):
        ex = build(ExampleDescriptor("example5", n=8, K=K))
        total = ex.diagnostics["expected_lambda"] * ex.diagnostics["retained_mass"]
        assert total > prev
        prev = total


def test_example5_needs_negative_conditional_drift():
    # with n = 0 the first atom has q = 1 and nonnegative drift
    with pytest.raises(ModelError, match="drift"):
        build(ExampleDescriptor("example5", n=0, K=2))
