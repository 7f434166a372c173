"""Brute-force minimax verification on small finite trees.

Psi(S, gamma) is the expected utility of frictionless wealth at price S.
On a finite tree the lower semicontinuous envelope of Psi coincides with
Psi itself, so sup-inf and inf-sup over the bid/ask box can be compared
with the frictional optimum directly.  Prices are enumerated on per-node
grids; the inner maximization over gamma uses the concave solver (or a
scalar bounded maximizer when only one strategy variable is present).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .primal import PrimalProblem, solve_frictionless
from .tree import AdaptedProcess, ModelError, Strategy, terminal_wealth
from .utility import NEG_INF, UtilityFunctional, evaluate


@dataclass(frozen=True)
class GridSpec:
    s_points: int = 5                       # per-node resolution across [bid, ask]
    gamma_interval: tuple[float, float] = (-2.0, 2.0)
    gamma_points: int = 41
    budget: int = 10**7

    def __post_init__(self):
        if self.s_points < 2:
            raise ModelError("need at least 2 price points per node")
        if self.gamma_points < 2:
            raise ModelError("need at least 2 strategy points per variable")


@dataclass
class MinimaxResult:
    supinf: float
    infsup: float
    argmin_s: AdaptedProcess
    tolerance: float           # Lipschitz-based error bar for the grid values
    corner_identity_gap: float  # worst |inf_S Psi(S, gamma) - Phi(X_T(gamma))|


@dataclass
class SaddleEquivalenceReport:
    left_violation: float      # worst Psi(S*, gamma) - Psi(S*, gamma*)
    right_violation: float     # worst Psi(S*, gamma*) - Psi(S, gamma*)
    lambda_: float
    gamma_star_value: float    # Phi(X_T(gamma*))
    mu_s_star: float

    def saddle_holds(self, tol: float) -> bool:
        return self.left_violation <= tol and self.right_violation <= tol

    def optimality_holds(self, tol: float) -> bool:
        return abs(self.gamma_star_value - self.lambda_) <= tol and abs(
            self.mu_s_star - self.lambda_
        ) <= tol


def _node_grids(problem: PrimalProblem, s_points: int) -> tuple[list, list[np.ndarray]]:
    nodes = list(problem.tree.nodes)
    grids = []
    for n in nodes:
        lo = problem.market.bid.at(n.id)
        hi = problem.market.ask.at(n.id)
        grids.append(np.linspace(lo, hi, s_points) if hi > lo else np.array([lo]))
    return nodes, grids


def _wealth_matrix(problem: PrimalProblem, nodes, s_combos: np.ndarray, gamma: dict[str, float]) -> np.ndarray:
    """Leaf wealth for every price combination at a fixed strategy."""
    tree = problem.tree
    nidx = {n.id: j for j, n in enumerate(nodes)}
    leaves = tree.leaves()
    W = np.ones((s_combos.shape[0], len(leaves)))
    for i, leaf in enumerate(leaves):
        path = tree.path(leaf.id)
        for t in range(1, tree.horizon + 1):
            g = gamma[path[t - 1].id]
            W[:, i] += g * (s_combos[:, nidx[path[t].id]] - s_combos[:, nidx[path[t - 1].id]])
    return W


def _psi_values(problem: PrimalProblem, W: np.ndarray) -> np.ndarray:
    """Expected utility per price combination from the leaf-wealth matrix."""
    u = problem.phi.scalar
    p = np.array([leaf.p for leaf in problem.tree.leaves()])
    out = np.full(W.shape[0], NEG_INF)
    if u.kind in ("log", "power"):
        ok = np.min(W, axis=1) > 0.0
    else:
        ok = np.ones(W.shape[0], dtype=bool)
    Wok = W[ok]
    if u.kind == "log":
        vals = np.log(Wok)
    elif u.kind == "power":
        vals = Wok**u.param / u.param
    elif u.kind == "exp":
        vals = -np.exp(-u.param * Wok) / u.param
    else:
        vals = Wok
    out[ok] = vals @ p
    return out


def _strategy_vars(problem: PrimalProblem) -> list:
    return [n for n in problem.tree.nodes if n.t < problem.tree.horizon]


def _sup_over_gamma_batch(problem: PrimalProblem, D: np.ndarray) -> np.ndarray:
    """Frictionless optimum per price combination for a single strategy variable.

    ``D`` holds the leaf-price increments S_leaf - S_0 per combination.
    The first-order condition sum p_i d_i U'(1 + g d_i) is strictly
    decreasing in g, so a vectorized bisection finds every root at once;
    combinations with one-sided increments have an unbounded objective
    (reported as +inf for utilities unbounded above).
    """
    u = problem.phi.scalar
    p = np.array([leaf.p for leaf in problem.tree.leaves()])
    nc = D.shape[0]
    big = 1e8
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(np.any(D > 0, axis=1), np.max(np.where(D > 0, -1.0 / np.where(D > 0, D, 1.0), -np.inf), axis=1), -big)
        hi = np.where(np.any(D < 0, axis=1), np.min(np.where(D < 0, -1.0 / np.where(D < 0, D, -1.0), np.inf), axis=1), big)
    if u.kind in ("exp", "linear"):
        lo = np.full(nc, -big)
        hi = np.full(nc, big)
    width = hi - lo
    lo = lo + 1e-12 * np.maximum(width, 1.0)
    hi = hi - 1e-12 * np.maximum(width, 1.0)

    def foc(g: np.ndarray) -> np.ndarray:
        w = 1.0 + g[:, None] * D
        if u.kind == "log":
            d1 = 1.0 / w
        elif u.kind == "power":
            d1 = np.maximum(w, 1e-300) ** (u.param - 1.0)
        elif u.kind == "exp":
            d1 = np.exp(np.minimum(-u.param * w, 700.0))
        else:
            d1 = np.ones_like(w)
        return (D * d1) @ p

    f_lo = foc(lo)
    f_hi = foc(hi)
    a, b = lo.copy(), hi.copy()
    interior = (f_lo > 0) & (f_hi < 0)
    for _ in range(100):
        mid = 0.5 * (a + b)
        pos = foc(mid) > 0
        a = np.where(interior & pos, mid, a)
        b = np.where(interior & ~pos, mid, b)
    g = 0.5 * (a + b)
    g = np.where(f_lo <= 0, lo, g)   # optimum pinned at the lower edge
    g = np.where(f_hi >= 0, hi, g)   # optimum pinned at the upper edge

    w = 1.0 + g[:, None] * D
    out = np.full(nc, np.inf)
    ok = np.min(w, axis=1) > 0 if u.kind in ("log", "power") else np.ones(nc, dtype=bool)
    if u.kind == "log":
        vals = np.log(np.maximum(w, 1e-300))
    elif u.kind == "power":
        vals = np.maximum(w, 1e-300) ** u.param / u.param
    elif u.kind == "exp":
        vals = -np.exp(np.minimum(-u.param * w, 700.0)) / u.param
    else:
        vals = w
    psi = vals @ p
    # an edge optimum at the +/-1e8 box means an improving ray: the true
    # supremum is infinite unless the utility is bounded above
    unbounded = ((f_lo <= 0) & (lo <= -0.99 * big)) | ((f_hi >= 0) & (hi >= 0.99 * big))
    out[ok] = psi[ok]
    if not u.bounded_above:
        out[unbounded] = np.inf
    return out


def _sup_over_gamma(problem: PrimalProblem, price: AdaptedProcess) -> float:
    """Frictionless optimum at a fixed price process."""
    gvars = _strategy_vars(problem)
    if len(gvars) == 1:
        n = gvars[0]
        leaves = problem.tree.leaves()
        D = np.array([[price.at(leaf.id) - price.at(n.id) for leaf in leaves]])
        return float(_sup_over_gamma_batch(problem, D)[0])
    sol = solve_frictionless(
        problem.tree, price, problem.phi, problem.constraints, problem.options
    )
    return sol.lambda_


def brute_force_minimax(problem: PrimalProblem, grids: GridSpec) -> MinimaxResult:
    """sup-inf and inf-sup of Psi over the grid, with honest error bars."""
    problem.validate()
    if problem.phi.banach_weight != 0.0:
        raise ModelError("minimax verification requires a plain expected utility")
    nodes, node_grids = _node_grids(problem, grids.s_points)
    gvars = _strategy_vars(problem)
    n_s = int(np.prod([len(g) for g in node_grids]))
    n_g = grids.gamma_points ** len(gvars)
    if n_s * n_g > grids.budget:
        raise ModelError(
            f"grid budget exceeded: need {n_s * n_g} evaluations, budget {grids.budget}"
        )
    s_combos = np.array(list(itertools.product(*node_grids)))
    g_lo, g_hi = grids.gamma_interval
    g_axis = np.linspace(g_lo, g_hi, grids.gamma_points)

    supinf = NEG_INF
    corner_gap = 0.0
    for combo in itertools.product(g_axis, repeat=len(gvars)):
        gamma = {n.id: float(v) for n, v in zip(gvars, combo)}
        W = _wealth_matrix(problem, nodes, s_combos, gamma)
        psi = _psi_values(problem, W)
        inner = float(np.min(psi))
        strat = Strategy(AdaptedProcess(gamma, 0, problem.tree.horizon - 1))
        frictional = evaluate(problem.phi, terminal_wealth(problem.tree, problem.market, strat), problem.tree)
        if np.isfinite(inner) or np.isfinite(frictional):
            corner_gap = max(corner_gap, abs(inner - frictional))
        supinf = max(supinf, inner)

    if len(gvars) == 1:
        nidx = {n.id: j for j, n in enumerate(nodes)}
        root_col = s_combos[:, nidx[gvars[0].id]]
        D = np.stack(
            [s_combos[:, nidx[leaf.id]] - root_col for leaf in problem.tree.leaves()], axis=1
        )
        sups = _sup_over_gamma_batch(problem, D)
        k = int(np.argmin(sups))
        infsup = float(sups[k])
        argmin = AdaptedProcess(
            {n.id: float(v) for n, v in zip(nodes, s_combos[k])}, 0, problem.tree.horizon
        )
    else:
        infsup = float("inf")
        argmin = None
        for row in s_combos:
            price = AdaptedProcess(
                {n.id: float(v) for n, v in zip(nodes, row)}, 0, problem.tree.horizon
            )
            val = _sup_over_gamma(problem, price)
            if val < infsup:
                infsup = val
                argmin = price

    tolerance = _grid_tolerance(problem, nodes, node_grids, g_axis, gvars, argmin)
    return MinimaxResult(supinf, infsup, argmin, tolerance, corner_gap)


def _grid_tolerance(problem, nodes, node_grids, g_axis, gvars, price) -> float:
    """Lipschitz-style error bar: sampled finite differences times steps."""
    g_step = float(g_axis[1] - g_axis[0]) if len(g_axis) > 1 else 0.0
    mid = {n.id: float(g[len(g) // 2]) for n, g in zip(nodes, node_grids)}
    base_price = AdaptedProcess(mid, 0, problem.tree.horizon)
    gamma0 = {n.id: 0.1 for n in gvars}

    def psi(price_vals: dict[str, float], gamma: dict[str, float]) -> float:
        strat = Strategy(AdaptedProcess(gamma, 0, problem.tree.horizon - 1))
        from .tree import frictionless_wealth

        w = frictionless_wealth(
            problem.tree, AdaptedProcess(price_vals, 0, problem.tree.horizon), strat
        )
        return evaluate(problem.phi, w, problem.tree)

    eps = 1e-5
    lip_g = 0.0
    for n in gvars:
        g_hi = dict(gamma0)
        g_hi[n.id] += eps
        a, b = psi(mid, g_hi), psi(mid, gamma0)
        if np.isfinite(a) and np.isfinite(b):
            lip_g = max(lip_g, abs(a - b) / eps)
    lip_s = 0.0
    s_step = 0.0
    for n, g in zip(nodes, node_grids):
        if len(g) < 2:
            continue
        s_step = max(s_step, float(g[1] - g[0]))
        shifted = dict(mid)
        shifted[n.id] += eps
        a, b = psi(shifted, gamma0), psi(mid, gamma0)
        if np.isfinite(a) and np.isfinite(b):
            lip_s = max(lip_s, abs(a - b) / eps)
    return lip_g * g_step + lip_s * s_step + 1e-9


def check_saddle_equivalence(
    problem: PrimalProblem,
    s_star: AdaptedProcess,
    gamma_star: Strategy,
    grids: GridSpec,
) -> SaddleEquivalenceReport:
    """Grid check of the saddle inequalities at a candidate pair."""
    problem.validate()
    s_star.validate(problem.tree)
    nodes, node_grids = _node_grids(problem, grids.s_points)
    gvars = _strategy_vars(problem)
    g_lo, g_hi = grids.gamma_interval
    g_axis = np.linspace(g_lo, g_hi, grids.gamma_points)

    star_combo = np.array([[s_star.at(n.id) for n in nodes]])
    gamma_map = {n.id: gamma_star.gamma.at(n.id) for n in gvars}
    value = float(_psi_values(problem, _wealth_matrix(problem, nodes, star_combo, gamma_map))[0])

    left = 0.0
    for combo in itertools.product(g_axis, repeat=len(gvars)):
        gamma = {n.id: float(v) for n, v in zip(gvars, combo)}
        v = float(_psi_values(problem, _wealth_matrix(problem, nodes, star_combo, gamma))[0])
        left = max(left, v - value)

    s_combos = np.array(list(itertools.product(*node_grids)))
    psi = _psi_values(problem, _wealth_matrix(problem, nodes, s_combos, gamma_map))
    right = max(0.0, value - float(np.min(psi)))

    from .primal import solve_primal

    lam = solve_primal(problem).lambda_
    frictional = evaluate(
        problem.phi, terminal_wealth(problem.tree, problem.market, gamma_star), problem.tree
    )
    mu = _sup_over_gamma(problem, s_star)
    return SaddleEquivalenceReport(left, right, lam, frictional, mu)
