"""Finite filtered probability spaces as rooted scenario trees.

Atoms of the time-t information partition are identified with the time-t
nodes, so adaptedness of a process is structural: one value per node.
A virtual trivial root at time -1 is implicit; the time-0 layer may
contain several nodes (nontrivial initial information).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

MIN_PROBABILITY = 1e-300
_REL_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a tree, process or model file violates its invariants."""


@dataclass(frozen=True)
class TreeNode:
    id: str
    t: int
    parent: str | None
    p: float


class ScenarioTree:
    """Rooted node tree with strictly positive atom probabilities.

    ``nodes`` must cover times 0..horizon; every node at t > 0 names a
    parent at t - 1 and children probabilities add up to the parent mass.
    """

    def __init__(self, nodes: list[TreeNode], horizon: int):
        if horizon < 1:
            raise ModelError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        self.nodes = tuple(sorted(nodes, key=lambda n: (n.t, n.id)))
        self._by_id = {}
        for n in self.nodes:
            if n.id in self._by_id:
                raise ModelError(f"duplicate node id {n.id!r}")
            self._by_id[n.id] = n
        self._children: dict[str, list[TreeNode]] = {n.id: [] for n in self.nodes}
        self._layers: list[list[TreeNode]] = [[] for _ in range(horizon + 1)]
        for n in self.nodes:
            if not (0 <= n.t <= horizon):
                raise ModelError(f"node {n.id!r}: time {n.t} outside 0..{horizon}")
            self._layers[n.t].append(n)
            if n.t == 0:
                if n.parent is not None:
                    raise ModelError(f"node {n.id!r}: time-0 nodes have no parent")
            else:
                if n.parent not in self._by_id:
                    raise ModelError(f"node {n.id!r}: unknown parent {n.parent!r}")
                par = self._by_id[n.parent]
                if par.t != n.t - 1:
                    raise ModelError(
                        f"node {n.id!r}: parent {n.parent!r} is at time {par.t}, "
                        f"expected {n.t - 1}"
                    )
                self._children[n.parent].append(n)
        self._validate_probabilities()

    def _validate_probabilities(self) -> None:
        for n in self.nodes:
            if not (n.p > 0) or not math.isfinite(n.p):
                raise ModelError(f"node {n.id!r}: probability {n.p} not strictly positive")
            if n.p < MIN_PROBABILITY:
                raise ModelError(
                    f"node {n.id!r}: probability {n.p} below {MIN_PROBABILITY} "
                    "(underflow guard)"
                )
        for t, layer in enumerate(self._layers):
            if not layer:
                raise ModelError(f"no nodes at time {t}")
            total = sum(n.p for n in layer)
            if abs(total - 1.0) > _REL_TOL * max(1.0, abs(total)):
                raise ModelError(
                    f"layer t={t}: probabilities sum to {total!r}, expected 1"
                )
        for n in self.nodes:
            kids = self._children[n.id]
            if n.t < self.horizon:
                if not kids:
                    raise ModelError(f"node {n.id!r}: non-terminal node has no children")
                s = sum(c.p for c in kids)
                if abs(s - n.p) > _REL_TOL * max(1.0, n.p):
                    raise ModelError(
                        f"node {n.id!r}: children probabilities sum to {s!r}, "
                        f"node mass is {n.p!r}"
                    )
            elif kids:
                raise ModelError(f"node {n.id!r}: terminal node has children")

    # -- structure queries ------------------------------------------------

    def node(self, node_id: str) -> TreeNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise ModelError(f"unknown node id {node_id!r}") from None

    def layer(self, t: int) -> list[TreeNode]:
        if not (0 <= t <= self.horizon):
            raise ModelError(f"time {t} outside 0..{self.horizon}")
        return list(self._layers[t])

    def children(self, node_id: str) -> list[TreeNode]:
        self.node(node_id)
        return list(self._children[node_id])

    def leaves(self) -> list[TreeNode]:
        return self.layer(self.horizon)

    def path(self, leaf_id: str) -> list[TreeNode]:
        """Nodes from time 0 down to ``leaf_id`` (inclusive)."""
        n = self.node(leaf_id)
        if n.t != self.horizon:
            raise ModelError(f"node {leaf_id!r} is not terminal")
        out = [n]
        while n.parent is not None:
            n = self.node(n.parent)
            out.append(n)
        out.reverse()
        return out

    def descendants_at(self, node_id: str, t: int) -> list[TreeNode]:
        n = self.node(node_id)
        if t < n.t:
            raise ModelError(f"time {t} before node {node_id!r} at {n.t}")
        front = [n]
        for _ in range(t - n.t):
            front = [c for f in front for c in self._children[f.id]]
        return front


@dataclass(frozen=True)
class AdaptedProcess:
    """One value per node over the covered time range [t0, t1]."""

    values: dict[str, float]
    t0: int
    t1: int

    def at(self, node_id: str) -> float:
        try:
            return self.values[node_id]
        except KeyError:
            raise ModelError(f"process has no value at node {node_id!r}") from None

    def validate(self, tree: ScenarioTree) -> None:
        if not (0 <= self.t0 <= self.t1 <= tree.horizon):
            raise ModelError(f"time range [{self.t0}, {self.t1}] outside tree")
        seen = set()
        for t in range(self.t0, self.t1 + 1):
            for n in tree.layer(t):
                if n.id not in self.values:
                    raise ModelError(f"process missing value at node {n.id!r}")
                if not math.isfinite(self.values[n.id]):
                    raise ModelError(f"process value at node {n.id!r} is not finite")
                seen.add(n.id)
        extra = set(self.values) - seen
        if extra:
            raise ModelError(f"process has values at unknown nodes {sorted(extra)}")


@dataclass(frozen=True)
class BidAskModel:
    """Adapted bid/ask prices with 0 < bid <= ask at every node."""

    bid: AdaptedProcess
    ask: AdaptedProcess

    def validate(self, tree: ScenarioTree) -> None:
        for proc, name in ((self.bid, "bid"), (self.ask, "ask")):
            if proc.t0 != 0 or proc.t1 != tree.horizon:
                raise ModelError(f"{name} process must cover t=0..{tree.horizon}")
            proc.validate(tree)
        for n in tree.nodes:
            lo, hi = self.bid.at(n.id), self.ask.at(n.id)
            if not (0 < lo <= hi):
                raise ModelError(
                    f"node {n.id!r}: need 0 < bid <= ask, got bid={lo!r} ask={hi!r}"
                )


@dataclass(frozen=True)
class Strategy:
    """Adapted stock holdings over t=0..T-1; gamma_{-1} = gamma_T = 0."""

    gamma: AdaptedProcess

    def validate(self, tree: ScenarioTree) -> None:
        if self.gamma.t0 != 0 or self.gamma.t1 != tree.horizon - 1:
            raise ModelError(
                f"strategy must cover t=0..{tree.horizon - 1}, "
                f"got [{self.gamma.t0}, {self.gamma.t1}]"
            )
        self.gamma.validate(tree)


@dataclass(frozen=True)
class RandomVariable:
    """Per-leaf value; -inf marks arguments outside a utility domain."""

    values: dict[str, float]

    def at(self, leaf_id: str) -> float:
        try:
            return self.values[leaf_id]
        except KeyError:
            raise ModelError(f"random variable has no value at leaf {leaf_id!r}") from None


@dataclass(frozen=True)
class MartingaleReport:
    is_martingale: bool
    max_violation: float
    worst_node: str | None = None


def constant_process(tree: ScenarioTree, value: float, t0: int = 0, t1: int | None = None) -> AdaptedProcess:
    if t1 is None:
        t1 = tree.horizon
    vals = {n.id: value for t in range(t0, t1 + 1) for n in tree.layer(t)}
    return AdaptedProcess(vals, t0, t1)


def terminal_wealth(tree: ScenarioTree, market: BidAskModel, strategy: Strategy) -> RandomVariable:
    """Wealth of a self-financing strategy after forced terminal liquidation.

    Path-wise: 1 + sum_t (bid_t * (dgamma_t)^- - ask_t * (dgamma_t)^+), with
    dgamma_T = -gamma_{T-1}.
    """
    market.validate(tree)
    strategy.validate(tree)
    out = {}
    for leaf in tree.leaves():
        path = tree.path(leaf.id)
        x = 1.0
        prev = 0.0
        for n in path:
            g = strategy.gamma.at(n.id) if n.t < tree.horizon else 0.0
            d = g - prev
            x += market.bid.at(n.id) * max(-d, 0.0) - market.ask.at(n.id) * max(d, 0.0)
            prev = g
        out[leaf.id] = x
    return RandomVariable(out)


def frictionless_wealth(tree: ScenarioTree, price: AdaptedProcess, strategy: Strategy) -> RandomVariable:
    """1 + sum_{t=1..T} gamma_{t-1} * (S_t - S_{t-1}) path-wise."""
    if price.t0 != 0 or price.t1 != tree.horizon:
        raise ModelError(f"price process must cover t=0..{tree.horizon}")
    price.validate(tree)
    strategy.validate(tree)
    out = {}
    for leaf in tree.leaves():
        path = tree.path(leaf.id)
        x = 1.0
        for t in range(1, tree.horizon + 1):
            x += strategy.gamma.at(path[t - 1].id) * (price.at(path[t].id) - price.at(path[t - 1].id))
        out[leaf.id] = x
    return RandomVariable(out)


def conditional_expectation(tree: ScenarioTree, rv: RandomVariable, t: int) -> AdaptedProcess:
    """Probability-weighted average of leaf values on each time-t atom."""
    if not (0 <= t <= tree.horizon):
        raise ModelError(f"time {t} outside 0..{tree.horizon}")
    out = {}
    for n in tree.layer(t):
        acc = 0.0
        for leaf in tree.descendants_at(n.id, tree.horizon):
            acc += leaf.p * rv.at(leaf.id)
        out[n.id] = acc / n.p
    return AdaptedProcess(out, t, t)


def expectation(tree: ScenarioTree, rv: RandomVariable) -> float:
    return sum(leaf.p * rv.at(leaf.id) for leaf in tree.leaves())


def is_martingale(tree: ScenarioTree, process: AdaptedProcess, tol: float = 1e-10) -> MartingaleReport:
    """Check E(dZ_{t+1} | F_t) = 0 at every non-terminal node of the range."""
    process.validate(tree)
    worst = 0.0
    worst_node = None
    for t in range(process.t0, process.t1):
        for n in tree.layer(t):
            exp_next = sum(c.p * process.at(c.id) for c in tree.children(n.id)) / n.p
            v = abs(exp_next - process.at(n.id))
            if v > worst:
                worst, worst_node = v, n.id
    return MartingaleReport(worst <= tol, worst, worst_node)


# -- model file I/O -------------------------------------------------------


def tree_from_dict(data: dict) -> ScenarioTree:
    try:
        horizon = int(data["horizon"])
        raw_nodes = data["nodes"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"model file missing field: {exc}") from None
    nodes = []
    for rec in raw_nodes:
        try:
            nodes.append(
                TreeNode(str(rec["id"]), int(rec["t"]), rec.get("parent"), float(rec["p"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"bad node record {rec!r}: {exc}") from None
    return ScenarioTree(nodes, horizon)


def process_from_dict(tree: ScenarioTree, data: dict, t0: int, t1: int, name: str) -> AdaptedProcess:
    try:
        vals = {str(k): float(v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise ModelError(f"bad {name} values: {exc}") from None
    proc = AdaptedProcess(vals, t0, t1)
    proc.validate(tree)
    return proc


def market_from_dict(tree: ScenarioTree, data: dict) -> BidAskModel:
    if "bid" not in data or "ask" not in data:
        raise ModelError("model file must carry 'bid' and 'ask' maps")
    market = BidAskModel(
        bid=process_from_dict(tree, data["bid"], 0, tree.horizon, "bid"),
        ask=process_from_dict(tree, data["ask"], 0, tree.horizon, "ask"),
    )
    market.validate(tree)
    return market


def load_model(source) -> tuple[ScenarioTree, BidAskModel, dict]:
    """Parse a model JSON file (path, file object or dict).

    Returns the tree, the bid/ask model and the remaining raw sections
    (utility, constraints, diagnostics, ...) untouched.
    """
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source) as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ModelError("model file must contain a JSON object")
    tree = tree_from_dict(data)
    market = market_from_dict(tree, data)
    rest = {k: v for k, v in data.items() if k not in ("horizon", "nodes", "bid", "ask")}
    return tree, market, rest


def model_to_dict(tree: ScenarioTree, market: BidAskModel, extra: dict | None = None) -> dict:
    data = {
        "horizon": tree.horizon,
        "nodes": [
            {"id": n.id, "t": n.t, "parent": n.parent, "p": n.p} for n in tree.nodes
        ],
        "bid": {n.id: market.bid.at(n.id) for n in tree.nodes},
        "ask": {n.id: market.ask.at(n.id) for n in tree.nodes},
    }
    if extra:
        data.update(extra)
    return data
