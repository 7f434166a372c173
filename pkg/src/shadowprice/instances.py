"""Seeded random problem instances for property suites.

Markets are built around an embedded strictly positive martingale M with
bid = M*(1-a) and ask = M*(1+b), a,b in [0.01, 0.15].  M itself is then a
consistent price system (with unit bond deflator), which rules out
arbitrage inside the bid/ask box and keeps the dual cone interior
nonempty.  The same M provides known-feasible dual points for weak
duality tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import DualVariable
from .primal import PrimalProblem
from .tree import AdaptedProcess, BidAskModel, ScenarioTree, TreeNode
from .utility import ScalarUtility, UtilityFunctional


@dataclass(frozen=True)
class InstanceBundle:
    problem: PrimalProblem
    martingale: AdaptedProcess  # inside [bid, ask]; martingale under Q
    density: AdaptedProcess     # dQ/dP density process, a strict martingale

    def feasible_dual(self, scale: float = 1.0) -> DualVariable:
        """A consistent price system: Z1 = scale*D, Z2 = scale*D*M.

        Both are martingales under the physical measure (D is a density
        process and M is a Q-martingale), and Z2/Z1 = M stays inside the
        bid/ask band, so the pair is dual feasible at any positive scale.
        """
        z1 = AdaptedProcess(
            {k: scale * v for k, v in self.density.values.items()},
            0,
            self.problem.tree.horizon,
        )
        z2 = AdaptedProcess(
            {k: scale * self.density.at(k) * v for k, v in self.martingale.values.items()},
            0,
            self.problem.tree.horizon,
        )
        return DualVariable(z1, z2)


def _random_tree(rng: np.random.Generator, max_horizon: int = 3, max_leaves: int = 24) -> ScenarioTree:
    horizon = int(rng.integers(1, max_horizon + 1))
    n_roots = 2 if (horizon <= 2 and rng.random() < 0.25) else 1
    nodes: list[TreeNode] = []
    frontier: list[tuple[str, float]] = []
    if n_roots == 1:
        nodes.append(TreeNode("n0", 0, None, 1.0))
        frontier = [("n0", 1.0)]
    else:
        w = float(rng.uniform(0.25, 0.75))
        nodes.append(TreeNode("n0", 0, None, w))
        nodes.append(TreeNode("n1", 0, None, 1.0 - w))
        frontier = [("n0", w), ("n1", 1.0 - w)]
    counter = len(frontier)
    for t in range(1, horizon + 1):
        remaining_splits = horizon - t
        new_frontier = []
        for nid, mass in frontier:
            max_k = max(2, max_leaves // max(1, len(frontier) * 2 ** remaining_splits))
            k = int(rng.integers(2, min(3, max_k) + 1))
            raw = rng.uniform(0.2, 1.0, size=k)
            probs = raw / raw.sum() * mass
            for j in range(k):
                cid = f"n{counter}"
                counter += 1
                nodes.append(TreeNode(cid, t, nid, float(probs[j])))
                new_frontier.append((cid, float(probs[j])))
        frontier = new_frontier
    return ScenarioTree(nodes, horizon)


def _embedded_martingale(
    tree: ScenarioTree, rng: np.random.Generator, tilt: float = 0.0
) -> tuple[AdaptedProcess, AdaptedProcess]:
    """Price M and density D with M a martingale under dQ = D_T dP.

    With ``tilt`` zero, Q is the physical measure and the optimal strategy
    is no-trade; a positive tilt perturbs the conditional weights so M
    drifts under P and utility maximizers take positions.
    """
    vals: dict[str, float] = {}
    dens: dict[str, float] = {}
    for n in tree.layer(0):
        vals[n.id] = float(rng.uniform(0.8, 1.2))
        dens[n.id] = 1.0
    for t in range(tree.horizon):
        for n in tree.layer(t):
            kids = tree.children(n.id)
            w = np.array([c.p for c in kids]) / n.p
            q = w * np.exp(rng.uniform(-tilt, tilt, size=len(kids)))
            q /= q.sum()
            move = rng.uniform(-0.2, 0.2, size=len(kids))
            move -= float(q @ move)  # zero conditional mean under Q
            # cap the downside so prices stay strictly positive
            worst = float(np.min(move))
            if worst < -0.5:
                move *= 0.5 / -worst
            for c, m, wc, qc in zip(kids, move, w, q):
                vals[c.id] = vals[n.id] * (1.0 + float(m))
                dens[c.id] = dens[n.id] * float(qc / wc)
    return AdaptedProcess(vals, 0, tree.horizon), AdaptedProcess(dens, 0, tree.horizon)


def random_instance(seed: int, max_horizon: int = 3, max_leaves: int = 24) -> InstanceBundle:
    """Deterministic no-arbitrage instance for a given seed."""
    rng = np.random.default_rng(seed)
    tree = _random_tree(rng, max_horizon, max_leaves)
    # half the instances are tilted so the optimum actually trades; those
    # get tight spreads, otherwise the round-trip cost swamps the drift
    tilt = float(rng.uniform(1.0, 2.0)) if rng.random() < 0.5 else 0.0
    mart, dens = _embedded_martingale(tree, rng, tilt)
    spread_hi = 0.03 if tilt else 0.15
    bid_vals, ask_vals = {}, {}
    for n in tree.nodes:
        a = float(rng.uniform(0.003, spread_hi))
        b = float(rng.uniform(0.003, spread_hi))
        bid_vals[n.id] = mart.at(n.id) * (1.0 - a)
        ask_vals[n.id] = mart.at(n.id) * (1.0 + b)
    market = BidAskModel(
        AdaptedProcess(bid_vals, 0, tree.horizon), AdaptedProcess(ask_vals, 0, tree.horizon)
    )
    if rng.random() < 0.5:
        phi = UtilityFunctional(ScalarUtility("log"))
    else:
        p = float(rng.choice([0.3, 0.5, 0.7, 0.85]))
        phi = UtilityFunctional(ScalarUtility("power", p))
    return InstanceBundle(PrimalProblem(tree, market, phi), mart, dens)


def random_fan_instance(seed: int, n_leaves: int) -> InstanceBundle:
    """One-period instance with a single root and exactly ``n_leaves`` leaves."""
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.2, 1.0, size=n_leaves)
    probs = raw / raw.sum()
    nodes = [TreeNode("n0", 0, None, 1.0)]
    nodes += [TreeNode(f"n{j + 1}", 1, "n0", float(probs[j])) for j in range(n_leaves)]
    tree = ScenarioTree(nodes, 1)
    tilt = float(rng.uniform(0.3, 1.0)) if rng.random() < 0.5 else 0.0
    mart, dens = _embedded_martingale(tree, rng, tilt)
    bid_vals, ask_vals = {}, {}
    for n in tree.nodes:
        a = float(rng.uniform(0.01, 0.15))
        b = float(rng.uniform(0.01, 0.15))
        bid_vals[n.id] = mart.at(n.id) * (1.0 - a)
        ask_vals[n.id] = mart.at(n.id) * (1.0 + b)
    market = BidAskModel(
        AdaptedProcess(bid_vals, 0, tree.horizon), AdaptedProcess(ask_vals, 0, tree.horizon)
    )
    if rng.random() < 0.5:
        phi = UtilityFunctional(ScalarUtility("log"))
    else:
        phi = UtilityFunctional(ScalarUtility("power", float(rng.choice([0.3, 0.5, 0.7]))))
    return InstanceBundle(PrimalProblem(tree, market, phi), mart, dens)
