"""Concave monotone utilities, their conjugate transform and Banach limits.

Scalar utilities follow the usual domain conventions: log and power are
-inf on (-inf, 0], exponential and linear are finite everywhere.  The
Banach-limit evaluator is restricted to almost convergent sequences
(eventually periodic descriptors), where every Banach limit agrees with
the uniform Cesaro value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tree import ModelError, RandomVariable, ScenarioTree

NEG_INF = float("-inf")


class ConfigurationError(ValueError):
    """Utility functional asked for data the model does not carry."""


@dataclass(frozen=True)
class ScalarUtility:
    """U(y) for kind in {log, power, exp, linear}.

    power: U(y) = y**p / p with p in (0, 1); exp: U(y) = -exp(-a*y)/a
    with a > 0; linear: U(y) = y.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("log", "power", "exp", "linear"):
            raise ConfigurationError(f"unknown utility kind {self.kind!r}")
        if self.kind == "power" and not (0.0 < self.param < 1.0):
            raise ConfigurationError(f"power exponent must lie in (0,1), got {self.param}")
        if self.kind == "exp" and not (self.param > 0.0):
            raise ConfigurationError(f"exp coefficient must be positive, got {self.param}")

    @property
    def finite_everywhere(self) -> bool:
        return self.kind in ("exp", "linear")

    @property
    def bounded_above(self) -> bool:
        return self.kind == "exp"

    def __call__(self, y: float) -> float:
        if self.kind == "log":
            return math.log(y) if y > 0 else NEG_INF
        if self.kind == "power":
            return y ** self.param / self.param if y > 0 else NEG_INF
        if self.kind == "exp":
            return -math.exp(-self.param * y) / self.param
        return y

    def deriv(self, y: float) -> float:
        if self.kind == "log":
            return 1.0 / y
        if self.kind == "power":
            return y ** (self.param - 1.0)
        if self.kind == "exp":
            return math.exp(min(-self.param * y, 700.0))  # overflow guard
        return 1.0

    def deriv2(self, y: float) -> float:
        if self.kind == "log":
            return -1.0 / y ** 2
        if self.kind == "power":
            return (self.param - 1.0) * y ** (self.param - 2.0)
        if self.kind == "exp":
            return -self.param * math.exp(-self.param * y)
        return 0.0


def conjugate(u: ScalarUtility, x: float) -> float:
    """V(x) = inf_y (-U(y) + x*y), finite for x > 0 (except linear kind).

    Closed forms: log -> 1 + ln x; power p -> ((p-1)/p) * x**(p/(p-1));
    exp a -> (x/a) * (1 - ln x); linear -> 0 at x = 1, -inf elsewhere.
    """
    if u.kind == "linear":
        return 0.0 if x == 1.0 else NEG_INF
    if x <= 0:
        raise ValueError(f"conjugate requires x > 0, got {x}")
    if u.kind == "log":
        return 1.0 + math.log(x)
    if u.kind == "power":
        p = u.param
        return (p - 1.0) / p * x ** (p / (p - 1.0))
    a = u.param
    return x / a * (1.0 - math.log(x))


def conjugate_deriv(u: ScalarUtility, x: float) -> float:
    if u.kind == "log":
        return 1.0 / x
    if u.kind == "power":
        p = u.param
        return x ** (p / (p - 1.0) - 1.0)
    if u.kind == "exp":
        return -math.log(x) / u.param
    raise ValueError("linear utility has no differentiable conjugate")


def conjugate_deriv2(u: ScalarUtility, x: float) -> float:
    if u.kind == "log":
        return -1.0 / x ** 2
    if u.kind == "power":
        p = u.param
        q = p / (p - 1.0) - 1.0
        return q * x ** (q - 1.0)
    if u.kind == "exp":
        return -1.0 / (u.param * x)
    raise ValueError("linear utility has no differentiable conjugate")


@dataclass(frozen=True)
class AlmostConvergentSequence:
    """Infinite real sequence: finite preamble followed by a repeated period."""

    preamble: tuple[float, ...]
    period: tuple[float, ...]

    def __post_init__(self):
        if len(self.period) == 0:
            raise ModelError("almost convergent sequence needs a nonempty period")

    @classmethod
    def constant(cls, c: float) -> "AlmostConvergentSequence":
        return cls((), (c,))

    def term(self, k: int) -> float:
        if k < len(self.preamble):
            return self.preamble[k]
        return self.period[(k - len(self.preamble)) % len(self.period)]

    def shift(self, by: int = 1) -> "AlmostConvergentSequence":
        seq = self
        for _ in range(by):
            if seq.preamble:
                seq = AlmostConvergentSequence(seq.preamble[1:], seq.period)
            else:
                seq = AlmostConvergentSequence((), seq.period[1:] + seq.period[:1])
        return seq

    def scale(self, a: float) -> "AlmostConvergentSequence":
        return AlmostConvergentSequence(
            tuple(a * x for x in self.preamble), tuple(a * x for x in self.period)
        )

    def offset(self, b: float) -> "AlmostConvergentSequence":
        return AlmostConvergentSequence(
            tuple(b + x for x in self.preamble), tuple(b + x for x in self.period)
        )


def banach_limit(seq: AlmostConvergentSequence) -> float:
    """Common value of the uniform Cesaro means: the period average."""
    return math.fsum(seq.period) / len(seq.period)


@dataclass(frozen=True)
class UtilityFunctional:
    """Phi(X) = E U(X) + banach_weight * LIM(X-tail)."""

    scalar: ScalarUtility
    banach_weight: float = 0.0

    def __post_init__(self):
        if self.banach_weight < 0:
            raise ConfigurationError("banach_weight must be nonnegative")


def evaluate(
    phi: UtilityFunctional,
    rv: RandomVariable,
    tree: ScenarioTree,
    tail: AlmostConvergentSequence | None = None,
) -> float:
    """Expected utility of a terminal payoff, plus an optional Banach term.

    Any leaf with positive mass and U = -inf forces the value -inf
    (the E f = -inf convention for integrands with E f^- = +inf).
    """
    acc = 0.0
    for leaf in tree.leaves():
        u = phi.scalar(rv.at(leaf.id))
        if u == NEG_INF:
            return NEG_INF
        acc += leaf.p * u
    if phi.banach_weight > 0.0:
        if tail is None:
            raise ConfigurationError(
                "functional has a Banach term but the payoff carries no tail descriptor"
            )
        acc += phi.banach_weight * banach_limit(tail)
    return acc


def utility_from_dict(data: dict) -> UtilityFunctional:
    """Parse the { "kind", "param", "banach_weight" } model section."""
    try:
        kind = data["kind"]
    except (KeyError, TypeError):
        raise ConfigurationError("utility section needs a 'kind'") from None
    return UtilityFunctional(
        scalar=ScalarUtility(kind, float(data.get("param", 0.0))),
        banach_weight=float(data.get("banach_weight", 0.0)),
    )


def utility_to_dict(phi: UtilityFunctional) -> dict:
    return {
        "kind": phi.scalar.kind,
        "param": phi.scalar.param,
        "banach_weight": phi.banach_weight,
    }
