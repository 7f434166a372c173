import numpy as np
import pytest

from shadowprice.dual import (
    DualVariable,
    dual_objective,
    extract_shadow_price,
    shadow_price_pipeline,
    solve_dual,
    verify_shadow,
)
from shadowprice.instances import random_instance
from shadowprice.primal import PrimalProblem, solve_primal
from shadowprice.tree import (
    AdaptedProcess,
    BidAskModel,
    ModelError,
    ScenarioTree,
    TreeNode,
    is_martingale,
)
from shadowprice.utility import ScalarUtility, UtilityFunctional

SEEDS = range(25)


def test_weak_duality_at_known_feasible_points():
    for seed in SEEDS:
        bundle = random_instance(seed)
        lam = solve_primal(bundle.problem).lambda_
        for scale in (0.25, 1.0, 4.0):
            zvar = bundle.feasible_dual(scale)
            zvar.validate(bundle.problem.tree, bundle.problem.market)
            obj = dual_objective(bundle.problem.tree, bundle.problem.phi, zvar)
            assert obj <= -lam + 1e-9


def test_strong_duality_small_batch():
    for seed in SEEDS:
        bundle = random_instance(seed)
        lam = solve_primal(bundle.problem).lambda_
        dual = solve_dual(bundle.problem)
        assert dual.status == "optimal"
        assert dual.value == pytest.approx(-lam, abs=1e-7)


def test_dual_variable_processes_are_martingales():
    for seed in (0, 3, 12):
        bundle = random_instance(seed)
        dual = solve_dual(bundle.problem)
        for proc in (dual.variable.z1, dual.variable.z2):
            assert is_martingale(bundle.problem.tree, proc, 1e-9).is_martingale


def test_shadow_price_stays_in_band_and_closes_gap():
    for seed in (2, 8, 17):
        bundle = random_instance(seed)
        dual, cert = shadow_price_pipeline(bundle.problem)
        tree, market = bundle.problem.tree, bundle.problem.market
        for n in tree.nodes:
            v = cert.s_star.at(n.id)
            assert market.bid.at(n.id) <= v <= market.ask.at(n.id)
        assert cert.gap <= 1e-6


def test_slackness_rows_carry_matching_side():
    # a tilted instance that certainly trades
    for seed in range(60):
        bundle = random_instance(seed)
        dual, cert = shadow_price_pipeline(bundle.problem)
        if cert.slackness_report:
            for row in cert.slackness_report:
                assert row["side"] in ("sell", "buy")
                assert row["deviation"] <= 1e-5
            return
    pytest.fail("no trading instance found in the first 60 seeds")


def test_extract_shadow_price_degenerate_midpoint():
    nodes = [TreeNode("r", 0, None, 1.0), TreeNode("a", 1, "r", 0.5), TreeNode("b", 1, "r", 0.5)]
    tree = ScenarioTree(nodes, 1)
    market = BidAskModel(
        AdaptedProcess({"r": 1.0, "a": 1.0, "b": 1.0}, 0, 1),
        AdaptedProcess({"r": 2.0, "a": 2.0, "b": 2.0}, 0, 1),
    )
    zhat = DualVariable(
        AdaptedProcess({"r": 1.0, "a": 2.0, "b": 0.0}, 0, 1),
        AdaptedProcess({"r": 1.5, "a": 3.0, "b": 0.0}, 0, 1),
    )
    s_star, degenerate = extract_shadow_price(zhat, market, tree)
    assert degenerate == ["b"]
    assert s_star.at("b") == pytest.approx(1.5)  # midpoint convention
    assert s_star.at("a") == pytest.approx(1.5)  # ratio 3/2


def test_extract_shadow_price_rejects_cone_violation():
    nodes = [TreeNode("r", 0, None, 1.0), TreeNode("a", 1, "r", 1.0)]
    tree = ScenarioTree(nodes, 1)
    market = BidAskModel(
        AdaptedProcess({"r": 1.0, "a": 1.0}, 0, 1),
        AdaptedProcess({"r": 2.0, "a": 2.0}, 0, 1),
    )
    zhat = DualVariable(
        AdaptedProcess({"r": 1.0, "a": 0.0}, 0, 1),
        AdaptedProcess({"r": 1.5, "a": 1.0}, 0, 1),
    )
    with pytest.raises(ModelError, match="cone"):
        extract_shadow_price(zhat, market, tree)


def test_dual_variable_validation_rejects_out_of_cone():
    bundle = random_instance(0)
    tree, market = bundle.problem.tree, bundle.problem.market
    bad = DualVariable(
        AdaptedProcess({n.id: 1.0 for n in tree.nodes}, 0, tree.horizon),
        AdaptedProcess({n.id: 100.0 for n in tree.nodes}, 0, tree.horizon),
    )
    with pytest.raises(ModelError):
        bad.validate(tree, market)


def test_dual_refuses_strategy_constraints():
    bundle = random_instance(0)
    constrained = PrimalProblem(
        bundle.problem.tree,
        bundle.problem.market,
        bundle.problem.phi,
        constraints={bundle.problem.tree.layer(0)[0].id: (0.0, 1e9)},
    )
    with pytest.raises(ModelError, match="constraint"):
        solve_dual(constrained)


def test_linear_utility_dual_value():
    nodes = [TreeNode("r", 0, None, 1.0), TreeNode("a", 1, "r", 0.6), TreeNode("b", 1, "r", 0.4)]
    tree = ScenarioTree(nodes, 1)
    market = BidAskModel(
        AdaptedProcess({"r": 1.0, "a": 1.3, "b": 0.6}, 0, 1),
        AdaptedProcess({"r": 1.1, "a": 1.4, "b": 0.7}, 0, 1),
    )
    problem = PrimalProblem(tree, market, UtilityFunctional(ScalarUtility("linear")))
    dual = solve_dual(problem)
    assert dual.status == "optimal"
    # conjugate support pins Z1 to 1, so the value is V(1) - E Z1_0 = -1
    assert dual.value == pytest.approx(-1.0, abs=1e-12)
    lam = solve_primal(problem).lambda_
    assert lam == pytest.approx(1.0, abs=1e-8)


def test_certified_gap_bounds_the_value_error():
    # a market whose optimal dual face is degenerate: the solver must not
    # certify a tight gap it cannot back up, and the bound it does report
    # must cover the actual distance to -lambda
    import dataclasses

    from shadowprice.examples import ExampleDescriptor, build

    ex = build(ExampleDescriptor("example5", n=8, K=6))
    unconstrained = dataclasses.replace(ex.problem, constraints={})
    lam = solve_primal(unconstrained).lambda_
    dual = solve_dual(unconstrained)
    gap = dual.residuals["gap_bound"]
    assert abs(dual.value + lam) <= gap
    if dual.status == "optimal":
        assert gap <= unconstrained.options.tol_dual_gap


def test_verify_shadow_reports_frictionless_value():
    bundle = random_instance(5)
    # the embedded martingale is arbitrage-free inside the band by design
    cert = verify_shadow(bundle.problem, bundle.martingale)
    assert np.isfinite(cert.mu_s_star)
    assert cert.mu_s_star >= cert.lambda_ - 1e-9
