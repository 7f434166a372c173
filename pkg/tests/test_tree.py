import math

import pytest

from shadowprice.tree import (
    AdaptedProcess,
    BidAskModel,
    ModelError,
    RandomVariable,
    ScenarioTree,
    Strategy,
    TreeNode,
    conditional_expectation,
    expectation,
    frictionless_wealth,
    is_martingale,
    load_model,
    model_to_dict,
    terminal_wealth,
)


def binomial(p_up=0.6, horizon=2):
    """Plain recombining-in-time (not in space) binomial tree."""
    nodes = [TreeNode("r", 0, None, 1.0)]
    frontier = [("r", 1.0)]
    count = 0
    for t in range(1, horizon + 1):
        nxt = []
        for nid, mass in frontier:
            for tag, q in (("u", p_up), ("d", 1 - p_up)):
                cid = f"{nid}{tag}"
                nodes.append(TreeNode(cid, t, nid, mass * q))
                nxt.append((cid, mass * q))
            count += 2
        frontier = nxt
    return ScenarioTree(nodes, horizon)


def test_layer_probabilities_must_sum_to_one():
    nodes = [
        TreeNode("a", 0, None, 1.0),
        TreeNode("b", 1, "a", 0.7),
    ]
    with pytest.raises(ModelError, match="probabilities sum to 0.7"):
        ScenarioTree(nodes, 1)


def test_children_must_sum_to_parent():
    nodes = [
        TreeNode("a", 0, None, 1.0),
        TreeNode("b", 1, "a", 0.5),
        TreeNode("c", 1, "a", 0.2),
        TreeNode("d", 1, "a", 0.3),
    ]
    tree = ScenarioTree(nodes, 1)
    assert {n.id for n in tree.children("a")} == {"b", "c", "d"}
    bad = [
        TreeNode("a", 0, None, 1.0),
        TreeNode("x", 0, None, 0.0),
    ]
    with pytest.raises(ModelError):
        ScenarioTree(bad, 0)


def test_unknown_parent_named():
    nodes = [TreeNode("a", 0, None, 1.0), TreeNode("b", 1, "zzz", 1.0)]
    with pytest.raises(ModelError, match="zzz"):
        ScenarioTree(nodes, 1)


def test_nontrivial_initial_layer_allowed():
    nodes = [
        TreeNode("a", 0, None, 0.4),
        TreeNode("b", 0, None, 0.6),
        TreeNode("a1", 1, "a", 0.4),
        TreeNode("b1", 1, "b", 0.6),
    ]
    tree = ScenarioTree(nodes, 1)
    assert len(tree.layer(0)) == 2


def test_path_and_leaves():
    tree = binomial()
    leaf = tree.node("ruu")
    assert [n.id for n in tree.path("ruu")] == ["r", "ru", "ruu"]
    assert leaf in tree.leaves()


def test_conditional_expectation_projection_and_tower():
    tree = binomial(0.3, 3)
    rv = RandomVariable({leaf.id: float(len(leaf.id)) + leaf.p for leaf in tree.leaves()})
    for t in range(tree.horizon + 1):
        ct = conditional_expectation(tree, rv, t)
        lifted = RandomVariable(
            {leaf.id: ct.at(tree.path(leaf.id)[t].id) for leaf in tree.leaves()}
        )
        again = conditional_expectation(tree, lifted, t)
        for n in tree.layer(t):
            assert again.at(n.id) == pytest.approx(ct.at(n.id), abs=1e-14)
        for s in range(t):
            tower = conditional_expectation(tree, lifted, s)
            direct = conditional_expectation(tree, rv, s)
            for n in tree.layer(s):
                assert tower.at(n.id) == pytest.approx(direct.at(n.id), abs=1e-13)


def test_expectation_matches_time_zero_conditional():
    tree = binomial(0.45, 2)
    rv = RandomVariable({leaf.id: hash(leaf.id) % 7 / 3.0 for leaf in tree.leaves()})
    c0 = conditional_expectation(tree, rv, 0)
    manual = sum(n.p * c0.at(n.id) for n in tree.layer(0))
    assert expectation(tree, rv) == pytest.approx(manual, abs=1e-14)


def test_is_martingale_flags_drift():
    tree = binomial(0.5, 1)
    fair = AdaptedProcess({"r": 1.0, "ru": 1.5, "rd": 0.5}, 0, 1)
    rep = is_martingale(tree, fair)
    assert rep.is_martingale and rep.max_violation <= 1e-14
    drifted = AdaptedProcess({"r": 1.0, "ru": 1.5, "rd": 0.6}, 0, 1)
    rep = is_martingale(tree, drifted)
    assert not rep.is_martingale
    assert rep.max_violation == pytest.approx(0.05)


def test_terminal_wealth_buy_and_hold():
    tree = binomial(0.5, 1)
    market = BidAskModel(
        AdaptedProcess({"r": 0.9, "ru": 1.4, "rd": 0.4}, 0, 1),
        AdaptedProcess({"r": 1.1, "ru": 1.6, "rd": 0.6}, 0, 1),
    )
    strat = Strategy(AdaptedProcess({"r": 2.0}, 0, 0))
    w = terminal_wealth(tree, market, strat)
    # buy 2 at ask 1.1, liquidate at bid
    assert w.at("ru") == pytest.approx(1.0 - 2 * 1.1 + 2 * 1.4)
    assert w.at("rd") == pytest.approx(1.0 - 2 * 1.1 + 2 * 0.4)


def test_frictionless_dominates_frictional():
    tree = binomial(0.5, 2)
    market = BidAskModel(
        AdaptedProcess({n.id: 1.0 - 0.1 * n.t for n in tree.nodes}, 0, 2),
        AdaptedProcess({n.id: 1.0 + 0.1 * (n.t + 1) for n in tree.nodes}, 0, 2),
    )
    mid = AdaptedProcess(
        {n.id: 0.5 * (market.bid.at(n.id) + market.ask.at(n.id)) for n in tree.nodes}, 0, 2
    )
    for g0, g1 in [(0.5, -1.0), (-2.0, 3.0), (0.0, 0.7)]:
        strat = Strategy(
            AdaptedProcess({n.id: (g0 if n.t == 0 else g1) for n in tree.nodes if n.t < 2}, 0, 1)
        )
        fw = frictionless_wealth(tree, mid, strat)
        xw = terminal_wealth(tree, market, strat)
        for leaf in tree.leaves():
            assert xw.at(leaf.id) <= fw.at(leaf.id) + 1e-12


def test_model_round_trip():
    tree = binomial(0.35, 2)
    market = BidAskModel(
        AdaptedProcess({n.id: 1.0 for n in tree.nodes}, 0, 2),
        AdaptedProcess({n.id: 1.2 for n in tree.nodes}, 0, 2),
    )
    data = model_to_dict(tree, market, {"utility": {"kind": "log"}})
    tree2, market2, rest = load_model(data)
    assert {n.id for n in tree2.nodes} == {n.id for n in tree.nodes}
    assert rest["utility"]["kind"] == "log"
    for n in tree.nodes:
        assert market2.ask.at(n.id) == market.ask.at(n.id)


def test_bid_above_ask_rejected():
    tree = binomial(0.5, 1)
    with pytest.raises(ModelError):
        BidAskModel(
            AdaptedProcess({n.id: 2.0 for n in tree.nodes}, 0, 1),
            AdaptedProcess({n.id: 1.0 for n in tree.nodes}, 0, 1),
        ).validate(tree)


def test_process_missing_node():
    tree = binomial(0.5, 1)
    proc = AdaptedProcess({"r": 1.0, "ru": 1.0}, 0, 1)
    with pytest.raises(ModelError, match="rd"):
        proc.validate(tree)
