"""Built-in problem instances with known diagnostics.

Three families, selected by name:

* ``example3`` -- one-period model with a frictionless time-0 price and
  a continuum of time-1 bid/ask scenarios, discretized by an equal-weight
  quadrature.
* ``example4`` -- one-period market with nontrivial initial information
  (atoms of two outcomes each), bid 1 / ask 4 at time 0 and a terminal
  price alternating between 1 and 4.  The interesting functional adds a
  shift-invariant tail limit to the expectation; its arithmetic is exposed
  through explicit sequence descriptors.
* ``example5`` -- two-period market with deterministically falling bids
  and atom-dependent asks, where the natural frictionless candidate price
  admits arbitrage and the finite optimum is reached by shorting after
  the first period.

Infinite outcome spaces are truncated with proportionally renormalized
probabilities, which preserves all conditional probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .primal import PrimalProblem
from .relaxation import OnePeriodModel, Scenario
from .tree import AdaptedProcess, BidAskModel, ModelError, ScenarioTree, TreeNode
from .utility import AlmostConvergentSequence, ScalarUtility, UtilityFunctional


@dataclass(frozen=True)
class ExampleDescriptor:
    which: str
    n: int = 8      # probability decay offset (example5)
    K: int = 6      # deepest retained atom (example5)
    N: int = 10     # retained atoms (example4)
    quad: int = 8   # quadrature size (example3)

    def __post_init__(self):
        if self.which not in ("example3", "example4", "example5"):
            raise ModelError(f"unknown example {self.which!r}")


@dataclass
class BuiltExample:
    descriptor: ExampleDescriptor
    problem: PrimalProblem | None
    one_period: OnePeriodModel | None
    diagnostics: dict = field(default_factory=dict)


def build(desc: ExampleDescriptor) -> BuiltExample:
    if desc.which == "example3":
        return _build_example3(desc)
    if desc.which == "example4":
        return _build_example4(desc)
    return _build_example5(desc)


def _build_example3(desc: ExampleDescriptor) -> BuiltExample:
    """Equal-weight quadrature of smooth bid/ask profiles on [0, 1]."""
    m = desc.quad
    if m < 2:
        raise ModelError("quadrature size must be at least 2")
    scenarios = []
    for j in range(m):
        w = (j + 0.5) / m
        bid1 = 0.8 + 0.6 * w
        scenarios.append(Scenario(1.0 / m, bid1, bid1 + 0.3))
    model = OnePeriodModel(1.0, tuple(scenarios), ScalarUtility("log"))
    e_bid = math.fsum(s.p * s.bid1 for s in scenarios)
    e_ask = math.fsum(s.p * s.ask1 for s in scenarios)
    return BuiltExample(
        desc,
        None,
        model,
        {"expected_bid1": e_bid, "expected_ask1": e_ask, "expected_branch": "positive"},
    )


def _build_example4(desc: ExampleDescriptor) -> BuiltExample:
    """Two-outcome atoms, bid 1 / ask 4 now, terminal price 1 or 4."""
    N = desc.N
    if N < 1:
        raise ModelError("need at least one retained atom")
    # point k carries mass 2^-k; atom j = {2j-1, 2j}
    total = math.fsum(2.0 ** -(k) for k in range(1, 2 * N + 1))
    nodes = []
    bid_vals, ask_vals = {}, {}
    for j in range(1, N + 1):
        odd_p = 2.0 ** -(2 * j - 1) / total
        even_p = 2.0 ** -(2 * j) / total
        atom = f"D{j}"
        nodes.append(TreeNode(atom, 0, None, odd_p + even_p))
        nodes.append(TreeNode(f"w{2 * j - 1}", 1, atom, odd_p))
        nodes.append(TreeNode(f"w{2 * j}", 1, atom, even_p))
        bid_vals[atom], ask_vals[atom] = 1.0, 4.0
        bid_vals[f"w{2 * j - 1}"] = ask_vals[f"w{2 * j - 1}"] = 1.0
        bid_vals[f"w{2 * j}"] = ask_vals[f"w{2 * j}"] = 4.0
    tree = ScenarioTree(nodes, 1)
    market = BidAskModel(AdaptedProcess(bid_vals, 0, 1), AdaptedProcess(ask_vals, 0, 1))
    problem = PrimalProblem(tree, market, UtilityFunctional(ScalarUtility("linear")))
    # terminal-price increments against the candidate price 2: the
    # outcome sequence alternates -1 (odd) and 2 (even) forever
    tail_ds1 = AlmostConvergentSequence((), (-1.0, 2.0))
    return BuiltExample(
        desc,
        problem,
        None,
        {
            "candidate_s0": 2.0,
            "conditional_expectation_s1": 2.0,
            "tail_ds1": tail_ds1,
            "tail_one_plus_ds1": tail_ds1.offset(1.0),
            "expected_lambda": 1.0,
        },
    )


def _build_example5(desc: ExampleDescriptor) -> BuiltExample:
    """Falling bids, atom-dependent asks, log utility; truncated atoms 0..K."""
    n, K = desc.n, desc.K
    if K < 1:
        raise ModelError("need at least two retained atoms")
    masses = [1.0 - 2.0**-n] + [2.0 ** (-n - k) for k in range(1, K + 1)]
    total = math.fsum(masses)
    nodes = [TreeNode("root", 0, None, 1.0)]
    bid_vals = {"root": 3.0}
    ask_vals = {"root": 3.0}
    gamma_closed = {}
    lam = 0.0
    for k in range(K + 1):
        q = 2.0 ** (-n - k)
        drift = -(1.0 - q) + q * (1.0 + k)  # E(ask_2 - bid_1 | atom)
        if drift >= 0:
            raise ModelError(
                f"atom D{k}: conditional drift {drift!r} not negative; increase n"
            )
        mass = masses[k] / total
        atom, odd, even = f"D{k}", f"w{2 * k + 1}", f"w{2 * k + 2}"
        nodes.append(TreeNode(atom, 1, "root", mass))
        nodes.append(TreeNode(odd, 2, atom, (1.0 - q) * mass))
        nodes.append(TreeNode(even, 2, atom, q * mass))
        bid_vals[atom], ask_vals[atom] = 2.0, 2.0 + k
        bid_vals[odd], ask_vals[odd] = 1.0, 1.0
        bid_vals[even], ask_vals[even] = 1.0, 3.0 + k
        g = q - (1.0 - q) / (1.0 + k)  # root of the per-atom optimality condition
        gamma_closed[atom] = g
        lam += mass * ((1.0 - q) * math.log(1.0 - g) + q * math.log(1.0 + (1.0 + k) * g))
    tree = ScenarioTree(nodes, 2)
    market = BidAskModel(AdaptedProcess(bid_vals, 0, 2), AdaptedProcess(ask_vals, 0, 2))
    # in the untruncated model the unbounded terminal asks make any short
    # position at time 0 ruinous on deep atoms, so short selling there is
    # infeasible; the truncation loses that mechanism and must carry the
    # restriction explicitly to reproduce the same optimum
    problem = PrimalProblem(
        tree,
        market,
        UtilityFunctional(ScalarUtility("log")),
        constraints={"root": (0.0, 1e9)},
    )
    candidate = AdaptedProcess(
        {nid: (3.0 if nid == "root" else bid_vals[nid] if nid.startswith("D") else ask_vals[nid])
         for nid in bid_vals},
        0,
        2,
    )
    return BuiltExample(
        desc,
        problem,
        None,
        {
            "expected_lambda": lam,
            # mass kept before renormalization; lambda times this grows
            # with K (each atom adds a positive term), while the
            # renormalized lambda itself shifts weight to deeper atoms
            "retained_mass": total,
            "gamma1_closed_form": gamma_closed,
            "candidate_price": candidate,
            "short_sale_constraint": {"root": (0.0, 1e9)},
        },
    )
