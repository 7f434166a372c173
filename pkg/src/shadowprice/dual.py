"""Lagrange dual over consistent price systems and shadow price extraction.

The dual variable is a pair of nonnegative martingales (Z1, Z2) with
Z1*bid <= Z2 <= Z1*ask node-wise.  Both are parameterized by their leaf
values; interior values are conditional expectations, so martingality is
structural and the cone constraints stay linear.  The dual objective
E V(Z1_T) - E Z1_0 is concave and is maximized with the same log-barrier
core as the primal; the optimum equals -lambda (no duality gap on finite
trees).  The shadow price is the node-wise ratio Z2/Z1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .solver_core import STATUS_MAX_ITER, STATUS_OPTIMAL, minimize_barrier
from .primal import (
    STATUS_INFEASIBLE,
    STATUS_UNBOUNDED,
    PrimalProblem,
    PrimalSolution,
    solve_frictionless,
    solve_primal,
)
from .tree import (
    AdaptedProcess,
    BidAskModel,
    ModelError,
    ScenarioTree,
)
from .utility import UtilityFunctional, conjugate, conjugate_deriv, conjugate_deriv2

# bid/ask gaps below this (relative) are treated as exact equalities
SPREAD_EPS = 1e-12
# Z1 below this fraction of the largest leaf value counts as degenerate
DEGENERACY_EPS = 1e-12


@dataclass(frozen=True)
class DualVariable:
    """Consistent price system: martingale deflators for bond and stock."""

    z1: AdaptedProcess
    z2: AdaptedProcess

    def validate(self, tree: ScenarioTree, market: BidAskModel, tol: float = 1e-9) -> None:
        self.z1.validate(tree)
        self.z2.validate(tree)
        for n in tree.nodes:
            a, b = self.z1.at(n.id), self.z2.at(n.id)
            if a < -tol or b < -tol:
                raise ModelError(f"node {n.id!r}: deflators must be nonnegative")
            lo = a * market.bid.at(n.id)
            hi = a * market.ask.at(n.id)
            if b < lo - tol or b > hi + tol:
                raise ModelError(
                    f"node {n.id!r}: Z2 = {b!r} outside [Z1*bid, Z1*ask] = [{lo!r}, {hi!r}]"
                )


@dataclass
class DualSolution:
    value: float              # max of E V(Z1_T) - E Z1_0; equals -lambda at the optimum
    variable: DualVariable | None
    status: str
    residuals: dict[str, float] = field(default_factory=dict)


@dataclass
class ShadowPriceCertificate:
    s_star: AdaptedProcess
    lambda_: float
    mu_s_star: float
    gap: float
    zhat: DualVariable | None
    degenerate_nodes: list[str]
    slackness_report: list[dict]
    primal: PrimalSolution | None = None
    frictionless: PrimalSolution | None = None


def dual_objective(tree: ScenarioTree, phi: UtilityFunctional, zvar: DualVariable) -> float:
    """E V(Z1_T) minus the expected time-0 value of Z1."""
    acc = 0.0
    for leaf in tree.leaves():
        acc += leaf.p * conjugate(phi.scalar, zvar.z1.at(leaf.id))
    for n in tree.layer(0):
        acc -= n.p * zvar.z1.at(n.id)
    return acc


def _leaf_rows(tree: ScenarioTree) -> tuple[list, dict[str, np.ndarray]]:
    """Per-node aggregation row: z_node = row . z_leaf (martingale fill-in)."""
    leaves = tree.leaves()
    lidx = {leaf.id: i for i, leaf in enumerate(leaves)}
    rows = {}
    for n in tree.nodes:
        row = np.zeros(len(leaves))
        for leaf in tree.descendants_at(n.id, tree.horizon):
            row[lidx[leaf.id]] = leaf.p / n.p
        rows[n.id] = row
    return leaves, rows


def _fill_processes(tree: ScenarioTree, rows: dict[str, np.ndarray], z1_leaf, z2_leaf) -> DualVariable:
    z1 = {n.id: float(rows[n.id] @ z1_leaf) for n in tree.nodes}
    z2 = {n.id: float(rows[n.id] @ z2_leaf) for n in tree.nodes}
    T = tree.horizon
    return DualVariable(AdaptedProcess(z1, 0, T), AdaptedProcess(z2, 0, T))


def _cone_system(problem: PrimalProblem, rows: dict[str, np.ndarray], nl: int):
    """Inequality/equality rows of the consistent-price-system cone.

    Variables are stacked as (z1 leaves, z2 leaves).  Nodes with zero
    spread force Z2 = Z1 * S exactly and contribute equality rows.
    """
    tree, market = problem.tree, problem.market
    G_rows, h_vals, A_rows, b_vals = [], [], [], []
    for n in tree.nodes:
        bid, ask = market.bid.at(n.id), market.ask.at(n.id)
        r = rows[n.id]
        if ask - bid <= SPREAD_EPS * max(1.0, ask):
            row = np.zeros(2 * nl)
            row[:nl] = bid * r
            row[nl:] = -r
            A_rows.append(row)
            b_vals.append(0.0)
            continue
        row = np.zeros(2 * nl)
        row[:nl] = bid * r
        row[nl:] = -r
        G_rows.append(row)
        h_vals.append(0.0)
        row = np.zeros(2 * nl)
        row[:nl] = -ask * r
        row[nl:] = r
        G_rows.append(row)
        h_vals.append(0.0)
    for i in range(nl):  # z1 leaf positivity
        row = np.zeros(2 * nl)
        row[i] = -1.0
        G_rows.append(row)
        h_vals.append(0.0)
    G = np.array(G_rows)
    h = np.array(h_vals)
    A = np.array(A_rows) if A_rows else None
    b = np.array(b_vals) if A_rows else None
    return G, h, A, b


def _phase_one(problem: PrimalProblem, rows: dict[str, np.ndarray], leaves, fix_z1: bool):
    """Max-slack LP start inside the cone; returns (z1, z2) leaf vectors.

    The cone is scale-invariant, so the result is renormalized to unit
    expected Z1.  With ``fix_z1`` the bond deflator is pinned to 1
    (linear utility, where the conjugate restricts Z1_T to {1}).
    """
    tree, market = problem.tree, problem.market
    nl = len(leaves)
    max_ask = max(market.ask.at(n.id) for n in tree.nodes)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for n in tree.nodes:
        bid, ask = market.bid.at(n.id), market.ask.at(n.id)
        r = rows[n.id]
        if ask - bid <= SPREAD_EPS * max(1.0, ask):
            row = np.zeros(2 * nl + 1)
            row[:nl] = bid * r
            row[nl:2 * nl] = -r
            A_eq.append(row)
            b_eq.append(0.0)
            continue
        row = np.zeros(2 * nl + 1)
        row[:nl] = bid * r
        row[nl:2 * nl] = -r
        row[-1] = 1.0
        A_ub.append(row)
        b_ub.append(0.0)
        row = np.zeros(2 * nl + 1)
        row[:nl] = -ask * r
        row[nl:2 * nl] = r
        row[-1] = 1.0
        A_ub.append(row)
        b_ub.append(0.0)
    for i in range(nl):
        row = np.zeros(2 * nl + 1)
        row[i] = -1.0
        row[-1] = 1.0
        A_ub.append(row)
        b_ub.append(0.0)
    if fix_z1:
        z1_bounds = [(1.0, 1.0)] * nl
    else:
        z1_bounds = [(1e-8, 1e8)] * nl
    bounds = z1_bounds + [(0.0, 1e8 * max_ask)] * nl + [(0.0, 1e6)]
    c = np.zeros(2 * nl + 1)
    c[-1] = -1.0
    res = linprog(
        c,
        A_ub=np.array(A_ub),
        b_ub=np.array(b_ub),
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if A_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0 or res.x[-1] <= 0.0:
        return None
    z1 = res.x[:nl].copy()
    z2 = res.x[nl:2 * nl].copy()
    if not fix_z1:
        scale = float(sum(leaf.p * z1[i] for i, leaf in enumerate(leaves)))
        z1 /= scale
        z2 /= scale
    return z1, z2


def solve_dual(problem: PrimalProblem) -> DualSolution:
    """Maximize E V(Z1_T) - E Z1_0 over consistent price systems."""
    problem.validate()
    if problem.phi.banach_weight != 0.0:
        raise ModelError("dual solver requires a plain expected utility (banach_weight 0)")
    if problem.constraints:
        # the consistent-price-system cone prices unconstrained strategies
        # only; a strategy box would need extra support terms
        raise ModelError("dual solver does not support strategy constraints")
    tree = problem.tree
    u = problem.phi.scalar
    leaves, rows = _leaf_rows(tree)
    nl = len(leaves)
    p = np.array([leaf.p for leaf in leaves])

    start = _phase_one(problem, rows, leaves, fix_z1=(u.kind == "linear"))
    if start is None:
        # empty cone interior: no consistent price system with the required
        # slack, the primal is unbounded or degenerate
        return DualSolution(float("-inf"), None, STATUS_INFEASIBLE)
    z1_0, z2_0 = start

    if u.kind == "linear":
        # conjugate support pins Z1_T to 1; the cone feasibility already
        # solved the whole problem and the value is V(1) - E Z1_0 = -1
        zvar = _fill_processes(tree, rows, z1_0, z2_0)
        return DualSolution(-1.0, zvar, STATUS_OPTIMAL)

    G, h, A, b = _cone_system(problem, rows, nl)

    def f(x: np.ndarray):
        z1 = x[:nl]
        if np.min(z1) <= 0.0:
            return float("inf"), np.zeros(2 * nl), np.zeros((2 * nl, 2 * nl))
        vals = np.array([conjugate(u, z) for z in z1])
        d1 = np.array([conjugate_deriv(u, z) for z in z1])
        d2 = np.array([conjugate_deriv2(u, z) for z in z1])
        val = -float(p @ (vals - z1))
        if not np.isfinite(val):
            return float("inf"), np.zeros(2 * nl), np.zeros((2 * nl, 2 * nl))
        grad = np.zeros(2 * nl)
        grad[:nl] = -p * (d1 - 1.0)
        hess = np.zeros((2 * nl, 2 * nl))
        hess[np.arange(nl), np.arange(nl)] = -p * d2
        return val, grad, hess

    x0 = np.concatenate([z1_0, z2_0])
    result = minimize_barrier(f, x0, G, h, A, b, options=problem.options.barrier())
    zvar = _fill_processes(tree, rows, result.x[:nl], result.x[nl:])
    value = -result.value
    status = result.status
    residuals = {"gap_bound": result.gap_bound, "newton_decrement": result.newton_decrement}
    if status in (STATUS_OPTIMAL, STATUS_MAX_ITER):
        # the certified gap bound is what decides optimality; the raw
        # iteration status only distinguishes unbounded and infeasible
        good = np.isfinite(result.gap_bound) and result.gap_bound <= problem.options.tol_dual_gap
        status = STATUS_OPTIMAL if good else STATUS_MAX_ITER
    return DualSolution(value, zvar, status, residuals)


def extract_shadow_price(
    zhat: DualVariable, market: BidAskModel, tree: ScenarioTree
) -> tuple[AdaptedProcess, list[str]]:
    """Node-wise ratio Z2/Z1, midpoint of [bid, ask] where Z1 vanishes."""
    z_scale = max(abs(v) for v in zhat.z1.values.values()) or 1.0
    s_vals: dict[str, float] = {}
    degenerate: list[str] = []
    for n in tree.nodes:
        a, b = zhat.z1.at(n.id), zhat.z2.at(n.id)
        bid, ask = market.bid.at(n.id), market.ask.at(n.id)
        if a <= DEGENERACY_EPS * z_scale:
            if b > DEGENERACY_EPS * z_scale * max(1.0, ask):
                raise ModelError(
                    f"node {n.id!r}: Z1 = 0 with Z2 = {b!r} > 0 violates the cone"
                )
            s_vals[n.id] = 0.5 * (bid + ask)
            degenerate.append(n.id)
        else:
            s_vals[n.id] = min(max(b / a, bid), ask)
    return AdaptedProcess(s_vals, 0, tree.horizon), degenerate


def slackness_report(
    tree: ScenarioTree,
    market: BidAskModel,
    s_star: AdaptedProcess,
    solution: PrimalSolution,
    trade_tol: float = 1e-5,
) -> list[dict]:
    """Per-node trade direction against the side S* sits on.

    Selling nodes should see S* at the bid, buying nodes at the ask;
    the terminal layer always sells the liquidated position.
    """
    out = []
    if solution.gamma_star is None:
        return out
    gamma = solution.gamma_star.gamma
    for n in tree.nodes:
        g = gamma.at(n.id) if n.t < tree.horizon else 0.0
        g_par = gamma.at(n.parent) if n.parent is not None else 0.0
        dg = g - g_par
        if abs(dg) <= trade_tol:
            continue
        side = "sell" if dg < 0 else "buy"
        target = market.bid.at(n.id) if side == "sell" else market.ask.at(n.id)
        out.append(
            {
                "node": n.id,
                "t": n.t,
                "dgamma": dg,
                "side": side,
                "deviation": abs(s_star.at(n.id) - target),
            }
        )
    return out


def verify_shadow(
    problem: PrimalProblem,
    s_star: AdaptedProcess,
    zhat: DualVariable | None = None,
    degenerate_nodes: list[str] | None = None,
) -> ShadowPriceCertificate:
    """Compare the frictional optimum with the frictionless one at S*."""
    problem.validate()
    s_star.validate(problem.tree)
    primal = solve_primal(problem)
    frictionless = solve_frictionless(
        problem.tree, s_star, problem.phi, problem.constraints, problem.options
    )
    mu = frictionless.lambda_
    gap = float("inf") if not np.isfinite(mu) else abs(primal.lambda_ - mu)
    report = slackness_report(problem.tree, problem.market, s_star, primal)
    return ShadowPriceCertificate(
        s_star=s_star,
        lambda_=primal.lambda_,
        mu_s_star=mu,
        gap=gap,
        zhat=zhat,
        degenerate_nodes=list(degenerate_nodes or []),
        slackness_report=report,
        primal=primal,
        frictionless=frictionless,
    )


def shadow_price_pipeline(problem: PrimalProblem) -> tuple[DualSolution, ShadowPriceCertificate]:
    """Dual solve, price extraction and end-to-end verification in one call."""
    dual = solve_dual(problem)
    if dual.variable is None:
        raise ModelError(f"dual solve failed with status {dual.status!r}")
    s_star, degenerate = extract_shadow_price(dual.variable, problem.market, problem.tree)
    cert = verify_shadow(problem, s_star, dual.variable, degenerate)
    return dual, cert


def certificate_to_dict(cert: ShadowPriceCertificate) -> dict:
    return {
        "lambda": cert.lambda_,
        "mu_s_star": cert.mu_s_star if np.isfinite(cert.mu_s_star) else "unbounded",
        "gap": cert.gap if np.isfinite(cert.gap) else "inf",
        "s_star": {k: cert.s_star.values[k] for k in sorted(cert.s_star.values)},
        "degenerate_nodes": sorted(cert.degenerate_nodes),
        "slackness_report": sorted(cert.slackness_report, key=lambda r: r["node"]),
    }
