"""Utility maximization under proportional transaction costs on a tree.

The problem is solved on the bond/stock/trade decomposition: per-node
variables beta (bond units), gamma (shares), L (shares sold at bid),
M (shares bought at ask), with budget and share-balance inequalities.
Consumption slack is allowed; the reported optimal value is re-verified
through the self-financing wealth of the returned strategy, which a
monotone utility cannot distinguish from the tight solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from .solver_core import (
    STATUS_MAX_ITER,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    BarrierOptions,
    BarrierResult,
    minimize_barrier,
)
from .tree import (
    AdaptedProcess,
    BidAskModel,
    ModelError,
    RandomVariable,
    ScenarioTree,
    Strategy,
    terminal_wealth,
)
from .utility import NEG_INF, UtilityFunctional, evaluate

DEFAULT_BOUND = 1e9
# box edges at least this large are read as "effectively unconstrained"
FREE_THRESHOLD = 1e8

STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    tol_kkt: float = 1e-8
    tol_gap: float = 1e-9
    # the leaf-parameterized dual centers less cleanly at extreme barrier
    # parameters, so its certified gap gets a looser optimality gate
    tol_dual_gap: float = 1e-6
    max_iter: int = 200
    unbounded_ceiling: float = 1e12

    def barrier(self) -> BarrierOptions:
        return BarrierOptions(
            tol_gap=self.tol_gap,
            max_newton=self.max_iter,
            unbounded_ceiling=self.unbounded_ceiling,
        )


@dataclass(frozen=True)
class PrimalProblem:
    tree: ScenarioTree
    market: BidAskModel
    phi: UtilityFunctional
    constraints: dict[str, tuple[float, float]] | None = None
    options: SolverOptions = field(default_factory=SolverOptions)

    def validate(self) -> None:
        self.market.validate(self.tree)
        if self.constraints:
            for node_id, (lo, hi) in self.constraints.items():
                self.tree.node(node_id)
                if not (lo <= 0.0 <= hi):
                    raise ModelError(
                        f"node {node_id!r}: strategy box [{lo}, {hi}] must contain 0"
                    )

    def bounds_for(self, node_id: str) -> tuple[float, float]:
        if self.constraints and node_id in self.constraints:
            return self.constraints[node_id]
        return (-DEFAULT_BOUND, DEFAULT_BOUND)


@dataclass(frozen=True)
class PrimalDecomposition:
    beta: AdaptedProcess
    gamma: AdaptedProcess
    sold: AdaptedProcess
    bought: AdaptedProcess


@dataclass
class PrimalSolution:
    lambda_: float
    gamma_star: Strategy | None
    decomposition: PrimalDecomposition | None
    status: str
    residuals: dict[str, float]
    certificate: Strategy | None = None  # improving ray when unbounded


@dataclass(frozen=True)
class ArbitrageReport:
    arbitrage: bool
    certificate: Strategy | None
    deflator: AdaptedProcess | None
    expected_gain: float


def _strategy_nodes(tree: ScenarioTree) -> list:
    return [n for n in tree.nodes if n.t < tree.horizon]


def _gain_matrix(tree: ScenarioTree, price: AdaptedProcess, gnodes: list) -> tuple[np.ndarray, np.ndarray]:
    """Frictionless gain per leaf as a linear map of per-node holdings."""
    gidx = {n.id: j for j, n in enumerate(gnodes)}
    leaves = tree.leaves()
    C = np.zeros((len(leaves), len(gnodes)))
    p = np.array([leaf.p for leaf in leaves])
    for i, leaf in enumerate(leaves):
        path = tree.path(leaf.id)
        for t in range(1, tree.horizon + 1):
            ds = price.at(path[t].id) - price.at(path[t - 1].id)
            C[i, gidx[path[t - 1].id]] += ds
    return C, p


def detect_arbitrage(
    tree: ScenarioTree,
    price: AdaptedProcess,
    constraints: dict[str, tuple[float, float]] | None = None,
    tol: float = 1e-9,
) -> ArbitrageReport:
    """Look for a nonnegative, somewhere-positive frictionless gain.

    Uses an LP over unit-box holdings (restricted to the directions the
    optional strategy boxes leave open).  When no arbitrage is found, a
    strictly positive martingale deflator is recovered by a feasibility LP.
    """
    price.validate(tree)
    gnodes = _strategy_nodes(tree)
    C, p = _gain_matrix(tree, price, gnodes)
    bounds = []
    for n in gnodes:
        lo, hi = (-1.0, 1.0)
        if constraints and n.id in constraints:
            clo, chi = constraints[n.id]
            if clo > -FREE_THRESHOLD:
                lo = 0.0
            if chi < FREE_THRESHOLD:
                hi = 0.0
        bounds.append((lo, hi))
    res = linprog(-(p @ C), A_ub=-C, b_ub=np.zeros(C.shape[0]), bounds=bounds, method="highs")
    gain = -res.fun if res.status == 0 else 0.0
    if res.status == 0 and gain > tol:
        d = res.x
        scale = float(np.max(np.abs(d))) or 1.0
        gamma = AdaptedProcess(
            {n.id: float(d[j] / scale) for j, n in enumerate(gnodes)}, 0, tree.horizon - 1
        )
        return ArbitrageReport(True, Strategy(gamma), None, gain)
    deflator = _martingale_deflator(tree, price)
    return ArbitrageReport(False, None, deflator, max(gain, 0.0))


def _martingale_deflator(tree: ScenarioTree, price: AdaptedProcess) -> AdaptedProcess | None:
    leaves = tree.leaves()
    lidx = {leaf.id: i for i, leaf in enumerate(leaves)}
    rows = []
    for t in range(tree.horizon):
        for n in tree.layer(t):
            row = np.zeros(len(leaves))
            for c in tree.children(n.id):
                for leaf in tree.descendants_at(c.id, tree.horizon):
                    row[lidx[leaf.id]] += price.at(c.id) - price.at(n.id)
            rows.append(row)
    A_eq = np.array(rows) if rows else np.zeros((0, len(leaves)))
    res = linprog(
        np.zeros(len(leaves)),
        A_eq=A_eq,
        b_eq=np.zeros(A_eq.shape[0]),
        bounds=[(1.0, None)] * len(leaves),
        method="highs",
    )
    if res.status != 0:
        return None
    q = res.x / float(np.sum(res.x))
    vals: dict[str, float] = {}
    for t in range(tree.horizon + 1):
        for n in tree.layer(t):
            mass = sum(q[lidx[leaf.id]] for leaf in tree.descendants_at(n.id, tree.horizon))
            vals[n.id] = mass / n.p
    return AdaptedProcess(vals, 0, tree.horizon)


class _Program:
    """Index bookkeeping for the decomposed transaction-cost program.

    At nodes with zero spread the sell/buy pair (L, M) carries a free
    ray L = M that makes the log-barrier subproblems unbounded below, so
    there the pair collapses to one signed net-sale variable.
    """

    SPREAD_EPS = 1e-12

    def __init__(self, problem: PrimalProblem):
        tree = problem.tree
        self.tree = tree
        self.nodes = list(tree.nodes)
        T = tree.horizon
        bid, ask = problem.market.bid, problem.market.ask
        self.merged = {
            n.id: (ask.at(n.id) - bid.at(n.id)) <= self.SPREAD_EPS * max(1.0, ask.at(n.id))
            for n in self.nodes
        }
        nv = 0
        self.beta_ix = {}
        self.gamma_ix = {}
        self.L_ix = {}   # sell volume; for merged nodes the signed net sale
        self.M_ix = {}   # buy volume; absent at merged nodes
        for n in self.nodes:
            self.beta_ix[n.id] = nv
            nv += 1
            self.L_ix[n.id] = nv
            nv += 1
            if not self.merged[n.id]:
                self.M_ix[n.id] = nv
                nv += 1
            if n.t < T:
                self.gamma_ix[n.id] = nv
                nv += 1
        self.n_vars = nv

        rows = []
        rhs = []
        for n in self.nodes:
            row = np.zeros(nv)
            row[self.beta_ix[n.id]] = 1.0
            row[self.L_ix[n.id]] = -bid.at(n.id)
            if not self.merged[n.id]:
                row[self.M_ix[n.id]] = ask.at(n.id)
            b = 0.0
            if n.parent is None:
                b = 1.0  # beta_{-1} = 1
            else:
                row[self.beta_ix[n.parent]] = -1.0
            rows.append(row)
            rhs.append(b)
        for n in self.nodes:
            row = np.zeros(nv)
            if n.t < T:
                row[self.gamma_ix[n.id]] = 1.0
            if n.parent is not None:
                row[self.gamma_ix[n.parent]] = -1.0
            row[self.L_ix[n.id]] = 1.0
            if not self.merged[n.id]:
                row[self.M_ix[n.id]] = -1.0
            rows.append(row)
            rhs.append(0.0)
        for n in self.nodes:
            if not self.merged[n.id]:
                for ix in (self.L_ix[n.id], self.M_ix[n.id]):
                    row = np.zeros(nv)
                    row[ix] = -1.0
                    rows.append(row)
                    rhs.append(0.0)
        for n in self.nodes:
            if n.t < T:
                lo, hi = problem.bounds_for(n.id)
                row = np.zeros(nv)
                row[self.gamma_ix[n.id]] = 1.0
                rows.append(row)
                rhs.append(hi)
                row = np.zeros(nv)
                row[self.gamma_ix[n.id]] = -1.0
                rows.append(row)
                rhs.append(-lo)
        self.G = np.array(rows)
        self.h = np.array(rhs)
        self.problem = problem

    def start_point(self) -> np.ndarray:
        tree = self.tree
        T = tree.horizon
        x = np.zeros(self.n_vars)
        max_ask = max(self.problem.market.ask.at(n.id) for n in self.nodes)
        eta = 0.05 / ((T + 1) * max(1.0, max_ask))
        margin = 0.1 / (T + 1)
        delta = eta / 4.0
        gamma0 = {}
        for n in self.nodes:
            if n.t < T:
                lo, hi = self.problem.bounds_for(n.id)
                width = hi - lo
                g = min(max(0.0, lo + min(eta, width / 4.0)), hi - min(eta, width / 4.0))
                gamma0[n.id] = g
                x[self.gamma_ix[n.id]] = g
        beta = {}
        bid, ask = self.problem.market.bid, self.problem.market.ask
        for n in self.nodes:
            g = gamma0.get(n.id, 0.0)
            g_par = gamma0.get(n.parent, 0.0) if n.parent is not None else 0.0
            dg = g - g_par
            b_par = beta[n.parent] if n.parent is not None else 1.0
            if self.merged[n.id]:
                tau = -dg - delta  # net sale, strictly inside the share constraint
                x[self.L_ix[n.id]] = tau
                beta[n.id] = b_par + tau * bid.at(n.id) - margin
            else:
                L = max(-dg, 0.0) + delta
                M = max(dg, 0.0) + 2.0 * delta
                x[self.L_ix[n.id]] = L
                x[self.M_ix[n.id]] = M
                beta[n.id] = b_par + L * bid.at(n.id) - M * ask.at(n.id) - margin
            x[self.beta_ix[n.id]] = beta[n.id]
        return x

    def sold_bought(self, x: np.ndarray, node_id: str) -> tuple[float, float]:
        if self.merged[node_id]:
            tau = float(x[self.L_ix[node_id]])
            return (max(tau, 0.0), max(-tau, 0.0))
        return (float(x[self.L_ix[node_id]]), float(x[self.M_ix[node_id]]))

    def objective(self):
        u = self.problem.phi.scalar
        leaves = self.tree.leaves()
        bix = np.array([self.beta_ix[leaf.id] for leaf in leaves])
        p = np.array([leaf.p for leaf in leaves])
        needs_pos = u.kind in ("log", "power")

        def f(x: np.ndarray):
            b = x[bix]
            if needs_pos and np.min(b) <= 0.0:
                return float("inf"), np.zeros(self.n_vars), np.zeros((self.n_vars, self.n_vars))
            with np.errstate(over="ignore"):
                if u.kind == "log":
                    vals, d1, d2 = np.log(b), 1.0 / b, -1.0 / b**2
                elif u.kind == "power":
                    pw = u.param
                    vals, d1, d2 = b**pw / pw, b ** (pw - 1.0), (pw - 1.0) * b ** (pw - 2.0)
                elif u.kind == "exp":
                    e = np.exp(-u.param * b)
                    vals, d1, d2 = -e / u.param, e, -u.param * e
                else:
                    vals, d1, d2 = b, np.ones_like(b), np.zeros_like(b)
            val = -float(p @ vals)
            if not np.isfinite(val):
                return float("inf"), np.zeros(self.n_vars), np.zeros((self.n_vars, self.n_vars))
            grad = np.zeros(self.n_vars)
            grad[bix] = -p * d1
            hess = np.zeros((self.n_vars, self.n_vars))
            hess[bix, bix] = -p * d2
            return val, grad, hess

        return f


def _extract_solution(prog: _Program, result: BarrierResult, problem: PrimalProblem) -> PrimalSolution:
    tree = problem.tree
    T = tree.horizon
    x = result.x
    gamma = AdaptedProcess(
        {nid: float(x[ix]) for nid, ix in prog.gamma_ix.items()}, 0, T - 1
    )
    strat = Strategy(gamma)
    trades = {n.id: prog.sold_bought(x, n.id) for n in prog.nodes}
    decomposition = PrimalDecomposition(
        beta=AdaptedProcess({n.id: float(x[prog.beta_ix[n.id]]) for n in prog.nodes}, 0, T),
        gamma=gamma,
        sold=AdaptedProcess({nid: s for nid, (s, _) in trades.items()}, 0, T),
        bought=AdaptedProcess({nid: b for nid, (_, b) in trades.items()}, 0, T),
    )
    # equality-tight recomputation through the wealth equation
    wealth = terminal_wealth(tree, problem.market, strat)
    lam = evaluate(problem.phi, wealth, tree)
    status = result.status
    residuals = _kkt_residuals(prog, result)
    # the certified gap bound decides optimality directly; the stationarity
    # entry is a diagnostic only, since the 1/(t s) multiplier estimates
    # carry rounding noise of order eps * t near active constraints
    if status in (STATUS_OPTIMAL, STATUS_MAX_ITER):
        good = (
            residuals["feasibility"] <= problem.options.tol_kkt
            and math.isfinite(residuals["gap_bound"])
            and residuals["gap_bound"] <= problem.options.tol_gap
        )
        status = STATUS_OPTIMAL if good else STATUS_MAX_ITER
    if status == STATUS_OPTIMAL:
        # default +/-1e9 boxes are a numerical device; hitting them means
        # the objective kept improving along a ray
        for nid, ix in prog.gamma_ix.items():
            lo, hi = problem.bounds_for(nid)
            if abs(lo) >= FREE_THRESHOLD and abs(hi) >= FREE_THRESHOLD:
                if abs(x[ix]) > 0.99 * FREE_THRESHOLD:
                    status = STATUS_UNBOUNDED
    return PrimalSolution(lam, strat, decomposition, status, residuals)


def _kkt_residuals(prog: _Program, result: BarrierResult) -> dict[str, float]:
    val, grad, _ = prog.objective()(result.x)
    lam = result.ineq_multipliers
    s = prog.h - prog.G @ result.x
    if lam.size:
        # relative to the size of the terms being cancelled: near-active
        # constraints carry multipliers of order t, so the raw residual
        # cannot beat eps times that scale
        terms = np.abs(prog.G.T) @ np.abs(lam)
        scale = max(1.0, float(np.max(np.abs(grad))), float(np.max(terms)))
        stat = float(np.max(np.abs(grad + prog.G.T @ lam))) / scale
    else:
        stat = float("nan")
    comp = float(np.max(lam * s)) if lam.size else 0.0
    feas = float(max(0.0, np.max(prog.G @ result.x - prog.h)))
    return {
        "stationarity": stat,
        "complementarity": comp,
        "feasibility": feas,
        "gap_bound": result.gap_bound,
        "kkt": max(stat if math.isfinite(stat) else 0.0, feas),
    }


def solve_primal(problem: PrimalProblem) -> PrimalSolution:
    """Maximize E U(beta_T) over the decomposed self-financing constraints."""
    problem.validate()
    if problem.phi.banach_weight != 0.0:
        raise ModelError("solver path requires a plain expected utility (banach_weight 0)")
    prog = _Program(problem)
    result = minimize_barrier(
        prog.objective(), prog.start_point(), prog.G, prog.h, options=problem.options.barrier()
    )
    if result.status == STATUS_UNBOUNDED:
        return PrimalSolution(float("inf"), None, None, STATUS_UNBOUNDED, {})
    return _extract_solution(prog, result, problem)


def solve_frictionless(
    tree: ScenarioTree,
    price: AdaptedProcess,
    phi: UtilityFunctional,
    constraints: dict[str, tuple[float, float]] | None = None,
    options: SolverOptions = SolverOptions(),
) -> PrimalSolution:
    """Maximize Phi(1 + (gamma . S)_T) for an adapted price process S."""
    price.validate(tree)
    if phi.banach_weight != 0.0:
        raise ModelError("solver path requires a plain expected utility (banach_weight 0)")
    if constraints:
        for node_id, (lo, hi) in constraints.items():
            tree.node(node_id)
            if not (lo <= 0.0 <= hi):
                raise ModelError(f"node {node_id!r}: strategy box [{lo}, {hi}] must contain 0")
    u = phi.scalar
    if not u.bounded_above:
        report = detect_arbitrage(tree, price, constraints)
        if report.arbitrage:
            return PrimalSolution(
                float("inf"), None, None, STATUS_UNBOUNDED, {}, certificate=report.certificate
            )
    gnodes = _strategy_nodes(tree)
    C, p = _gain_matrix(tree, price, gnodes)
    nv = len(gnodes)
    rows, rhs = [], []
    for j, n in enumerate(gnodes):
        lo, hi = (-DEFAULT_BOUND, DEFAULT_BOUND)
        if constraints and n.id in constraints:
            lo, hi = constraints[n.id]
        row = np.zeros(nv)
        row[j] = 1.0
        rows.append(row)
        rhs.append(hi)
        row = np.zeros(nv)
        row[j] = -1.0
        rows.append(row)
        rhs.append(-lo)
    G, h = np.array(rows), np.array(rhs)
    needs_pos = u.kind in ("log", "power")

    def f(x: np.ndarray):
        w = 1.0 + C @ x
        if needs_pos and np.min(w) <= 0.0:
            return float("inf"), np.zeros(nv), np.zeros((nv, nv))
        with np.errstate(over="ignore"):
            if u.kind == "log":
                vals, d1, d2 = np.log(w), 1.0 / w, -1.0 / w**2
            elif u.kind == "power":
                pw = u.param
                vals, d1, d2 = w**pw / pw, w ** (pw - 1.0), (pw - 1.0) * w ** (pw - 2.0)
            elif u.kind == "exp":
                e = np.exp(-u.param * w)
                vals, d1, d2 = -e / u.param, e, -u.param * e
            else:
                vals, d1, d2 = w, np.ones_like(w), np.zeros_like(w)
        val = -float(p @ vals)
        if not np.isfinite(val):
            return float("inf"), np.zeros(nv), np.zeros((nv, nv))
        grad = -C.T @ (p * d1)
        hess = -(C.T * (p * d2)) @ C
        return val, grad, hess

    x0 = np.zeros(nv)
    for j, n in enumerate(gnodes):
        if constraints and n.id in constraints:
            lo, hi = constraints[n.id]
            eps = min(1e-3, (hi - lo) / 4.0)
            x0[j] = min(max(0.0, lo + eps), hi - eps)
    result = minimize_barrier(f, x0, G, h, options=options.barrier())
    gamma = AdaptedProcess(
        {n.id: float(result.x[j]) for j, n in enumerate(gnodes)}, 0, tree.horizon - 1
    )
    strat = Strategy(gamma)
    wealth = RandomVariable(
        {leaf.id: float(1.0 + (C @ result.x)[i]) for i, leaf in enumerate(tree.leaves())}
    )
    lam = evaluate(phi, wealth, tree)
    status = result.status
    if status == STATUS_OPTIMAL:
        for j, n in enumerate(gnodes):
            lo, hi = (-DEFAULT_BOUND, DEFAULT_BOUND)
            if constraints and n.id in constraints:
                lo, hi = constraints[n.id]
            if abs(lo) >= FREE_THRESHOLD and abs(hi) >= FREE_THRESHOLD and abs(result.x[j]) > 0.99 * FREE_THRESHOLD:
                status = STATUS_UNBOUNDED
    residuals = {"gap_bound": result.gap_bound, "newton_decrement": result.newton_decrement}
    return PrimalSolution(lam, strat, None, status, residuals)
