"""Utility maximization under proportional transaction costs on scenario
trees, with shadow prices extracted from the convex dual and verified by
independent brute-force checks.

Setting SHADOWPRICE_THREADS caps the linear-algebra thread pools; it must
be honored before numpy is first imported, hence the dance below.
"""

import os as _os

_threads = _os.environ.get("SHADOWPRICE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .tree import (
    AdaptedProcess,
    BidAskModel,
    MartingaleReport,
    ModelError,
    RandomVariable,
    ScenarioTree,
    Strategy,
    TreeNode,
    conditional_expectation,
    constant_process,
    expectation,
    frictionless_wealth,
    is_martingale,
    load_model,
    model_to_dict,
    terminal_wealth,
)
from .utility import (
    AlmostConvergentSequence,
    ConfigurationError,
    ScalarUtility,
    UtilityFunctional,
    banach_limit,
    conjugate,
    evaluate,
    utility_from_dict,
    utility_to_dict,
)
from .primal import (
    ArbitrageReport,
    PrimalProblem,
    PrimalSolution,
    SolverOptions,
    detect_arbitrage,
    solve_frictionless,
    solve_primal,
)
from .dual import (
    DualSolution,
    DualVariable,
    ShadowPriceCertificate,
    extract_shadow_price,
    shadow_price_pipeline,
    solve_dual,
    verify_shadow,
)
from .relaxation import (
    OnePeriodModel,
    SaddleReport,
    Scenario,
    relaxed_utility,
    saddle_point_conditions,
    verify_saddle,
)
from .minimax import (
    GridSpec,
    MinimaxResult,
    SaddleEquivalenceReport,
    brute_force_minimax,
    check_saddle_equivalence,
)
from .instances import InstanceBundle, random_fan_instance, random_instance
from .examples import BuiltExample, ExampleDescriptor, build
from .acceptance import CriterionResult, run_acceptance

__version__ = "0.1.0"

__all__ = [
    "AdaptedProcess",
    "AlmostConvergentSequence",
    "ArbitrageReport",
    "BidAskModel",
    "BuiltExample",
    "ConfigurationError",
    "CriterionResult",
    "DualSolution",
    "DualVariable",
    "ExampleDescriptor",
    "GridSpec",
    "InstanceBundle",
    "MartingaleReport",
    "MinimaxResult",
    "ModelError",
    "OnePeriodModel",
    "PrimalProblem",
    "PrimalSolution",
    "RandomVariable",
    "SaddleEquivalenceReport",
    "SaddleReport",
    "ScalarUtility",
    "Scenario",
    "ScenarioTree",
    "ShadowPriceCertificate",
    "SolverOptions",
    "Strategy",
    "TreeNode",
    "UtilityFunctional",
    "banach_limit",
    "brute_force_minimax",
    "build",
    "check_saddle_equivalence",
    "conditional_expectation",
    "conjugate",
    "constant_process",
    "detect_arbitrage",
    "evaluate",
    "expectation",
    "extract_shadow_price",
    "frictionless_wealth",
    "is_martingale",
    "load_model",
    "model_to_dict",
    "random_fan_instance",
    "random_instance",
    "relaxed_utility",
    "run_acceptance",
    "saddle_point_conditions",
    "shadow_price_pipeline",
    "solve_dual",
    "solve_frictionless",
    "solve_primal",
    "terminal_wealth",
    "utility_from_dict",
    "utility_to_dict",
    "verify_saddle",
    "verify_shadow",
]
