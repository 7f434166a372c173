"""One-period relaxed utility in closed form and its saddle points.

At time 0 the stock trades at a single price s0; at time 1 each scenario
carries a bid/ask pair with spread bounded away from zero.  The relaxed
utility interpolates linearly, per scenario, between the utilities of the
two endpoint wealths; a saddle point is found from the first-order
condition of whichever trade direction admits a root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .tree import ModelError
from .utility import NEG_INF, ScalarUtility

_PROB_TOL = 1e-12
_DOMAIN_EPS = 1e-12


@dataclass(frozen=True)
class Scenario:
    p: float
    bid1: float
    ask1: float


@dataclass(frozen=True)
class OnePeriodModel:
    """Frictionless time 0, bid/ask time 1, one risky asset."""

    s0: float
    scenarios: tuple[Scenario, ...]
    u: ScalarUtility
    spread_floor: float = 1e-9

    def __post_init__(self):
        if not (self.s0 > 0):
            raise ModelError(f"s0 must be positive, got {self.s0}")
        if not self.scenarios:
            raise ModelError("model needs at least one scenario")
        total = math.fsum(s.p for s in self.scenarios)
        if abs(total - 1.0) > _PROB_TOL:
            raise ModelError(f"scenario probabilities sum to {total!r}, expected 1")
        for i, s in enumerate(self.scenarios):
            if not (s.p > 0):
                raise ModelError(f"scenario {i}: probability must be positive")
            if not (0 < s.bid1 <= s.ask1):
                raise ModelError(f"scenario {i}: need 0 < bid <= ask")
            if s.ask1 - s.bid1 < self.spread_floor:
                raise ModelError(
                    f"scenario {i}: spread {s.ask1 - s.bid1!r} below floor {self.spread_floor}"
                )
        if self.u.kind == "linear":
            raise ModelError("saddle machinery needs a strictly concave differentiable utility")


def frictional_wealth(model: OnePeriodModel, gamma0: float, scenario: Scenario) -> float:
    """Buy at s0, liquidate at bid (long) or ask (short)."""
    if gamma0 >= 0:
        return 1.0 + gamma0 * (scenario.bid1 - model.s0)
    return 1.0 + gamma0 * (scenario.ask1 - model.s0)


def frictional_value(model: OnePeriodModel, gamma0: float) -> float:
    acc = 0.0
    for s in model.scenarios:
        v = model.u(frictional_wealth(model, gamma0, s))
        if v == NEG_INF:
            return NEG_INF
        acc += s.p * v
    return acc


def relaxed_utility(model: OnePeriodModel, gamma0: float, s1) -> float:
    """Per-scenario linear interpolation between the endpoint utilities."""
    if len(s1) != len(model.scenarios):
        raise ModelError(f"expected {len(model.scenarios)} time-1 prices, got {len(s1)}")
    acc = 0.0
    for s, x in zip(model.scenarios, s1):
        if x < s.bid1 - _DOMAIN_EPS or x > s.ask1 + _DOMAIN_EPS:
            raise ModelError(f"price {x!r} outside [{s.bid1}, {s.ask1}]")
        w = (min(max(x, s.bid1), s.ask1) - s.bid1) / (s.ask1 - s.bid1)
        hi = model.u(1.0 + gamma0 * (s.ask1 - model.s0))
        lo = model.u(1.0 + gamma0 * (s.bid1 - model.s0))
        if (hi == NEG_INF and w > 0) or (lo == NEG_INF and w < 1):
            return NEG_INF
        acc += s.p * (w * (hi if w > 0 else 0.0) + (1.0 - w) * (lo if w < 1 else 0.0))
    return acc


def _foc(model: OnePeriodModel, gamma: float, prices) -> float:
    """E[(S1 - s0) U'(1 + gamma (S1 - s0))] for a fixed price selection."""
    acc = 0.0
    for s, x in zip(model.scenarios, prices):
        d = x - model.s0
        acc += s.p * d * model.u.deriv(1.0 + gamma * d)
    return acc


def _gamma_domain_edge(model: OnePeriodModel, prices, sign: int) -> float:
    """Largest |gamma| (moving in direction ``sign``) keeping wealth positive."""
    if model.u.finite_everywhere:
        return 1e6
    edge = 1e6
    for s, x in zip(model.scenarios, prices):
        d = (x - model.s0) * sign
        if d < 0:
            edge = min(edge, -1.0 / d)
    return edge


def saddle_point_conditions(model: OnePeriodModel) -> tuple[float, list[float], str]:
    """Optimal trade, its supporting time-1 prices and the branch taken.

    Positive trades are supported by the bid selection, negative trades
    by the ask selection; when neither first-order condition has a root
    of the right sign the trade is zero and the prices mix bid and ask
    with one global weight matching the expectation to s0.
    """
    bids = [s.bid1 for s in model.scenarios]
    asks = [s.ask1 for s in model.scenarios]
    e_bid = math.fsum(s.p * s.bid1 for s in model.scenarios)
    e_ask = math.fsum(s.p * s.ask1 for s in model.scenarios)

    if e_bid > model.s0:
        edge = _gamma_domain_edge(model, bids, +1) * (1.0 - _DOMAIN_EPS)
        hi = min(1.0, edge)
        while _foc(model, hi, bids) > 0 and hi < edge:
            hi = min(2.0 * hi, edge)
        if _foc(model, hi, bids) > 0:
            raise ModelError(
                "positive-trade condition has no root: the bid selection "
                "dominates s0 outright (model inconsistency)"
            )
        g = brentq(lambda g: _foc(model, g, bids), 0.0, hi, xtol=1e-14, rtol=1e-15)
        return float(g), bids, "positive"

    if e_ask < model.s0:
        edge = _gamma_domain_edge(model, asks, -1) * (1.0 - _DOMAIN_EPS)
        lo = max(-1.0, -edge)
        while _foc(model, lo, asks) < 0 and lo > -edge:
            lo = max(2.0 * lo, -edge)
        if _foc(model, lo, asks) < 0:
            raise ModelError(
                "negative-trade condition has no root: s0 dominates the ask "
                "selection outright (model inconsistency)"
            )
        g = brentq(lambda g: _foc(model, g, asks), lo, 0.0, xtol=1e-14, rtol=1e-15)
        return float(g), asks, "negative"

    # zero-trade branch: any in-bounds selection with mean s0 supports it
    if not (e_bid <= model.s0 <= e_ask):
        raise ModelError(
            f"no zero-trade selection: s0 = {model.s0} outside [{e_bid}, {e_ask}]"
        )
    theta = (model.s0 - e_bid) / (e_ask - e_bid)
    prices = [theta * a + (1.0 - theta) * b for b, a in zip(bids, asks)]
    return 0.0, prices, "zero"


@dataclass(frozen=True)
class SaddleReport:
    gamma_violation: float   # worst Psi(s*, gamma) - Psi(s*, gamma*) over the gamma grid
    price_violation: float   # worst Psi(s*, gamma*) - Psi(s, gamma*) over the price grids
    worst_gamma: float | None
    saddle_value: float

    def passes(self, tol: float) -> bool:
        return self.gamma_violation <= tol and self.price_violation <= tol


def verify_saddle(
    model: OnePeriodModel,
    gamma0_star: float,
    s1_star,
    gamma_grid: tuple[float, float, int] = (-2.0, 2.0, 200),
    s_points: int = 200,
) -> SaddleReport:
    """Grid check of both saddle inequalities around the candidate pair.

    The relaxed utility is affine in each scenario price separately, so
    the price side is scanned one scenario at a time.
    """
    value = relaxed_utility(model, gamma0_star, s1_star)
    g_lo, g_hi, g_n = gamma_grid
    worst_g = 0.0
    worst_g_at = None
    for i in range(g_n):
        g = g_lo + (g_hi - g_lo) * i / (g_n - 1)
        v = relaxed_utility(model, g, s1_star)
        if v - value > worst_g:
            worst_g = v - value
            worst_g_at = g
    worst_s = 0.0
    prices = list(s1_star)
    for j, s in enumerate(model.scenarios):
        saved = prices[j]
        for i in range(s_points):
            prices[j] = s.bid1 + (s.ask1 - s.bid1) * i / (s_points - 1)
            v = relaxed_utility(model, gamma0_star, prices)
            worst_s = max(worst_s, value - v)
        prices[j] = saved
    return SaddleReport(worst_g, worst_s, worst_g_at, value)


def random_one_period(seed: int) -> OnePeriodModel:
    """Seeded model with mixed-sign price moves (no degenerate branches)."""
    import numpy as np

    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 7))
    raw = rng.uniform(0.2, 1.0, size=k)
    probs = raw / raw.sum()
    bids = rng.uniform(0.5, 1.5, size=k)
    spreads = rng.uniform(0.05, 0.5, size=k)
    scenarios = tuple(
        Scenario(float(probs[i]), float(bids[i]), float(bids[i] + spreads[i])) for i in range(k)
    )
    lo = min(s.bid1 for s in scenarios)
    hi = max(s.ask1 for s in scenarios)
    s0 = float(rng.uniform(lo + 0.02 * (hi - lo), hi - 0.02 * (hi - lo)))
    kind = rng.choice(["log", "power", "exp"])
    if kind == "log":
        u = ScalarUtility("log")
    elif kind == "power":
        u = ScalarUtility("power", float(rng.choice([0.3, 0.5, 0.7])))
    else:
        u = ScalarUtility("exp", float(rng.uniform(0.5, 2.0)))
    return OnePeriodModel(s0, scenarios, u)
