"""Deadline-based Wi-Fi offloading: queueing analysis, simulation, optimization."""

from .params import (DerivedQuantities, Preference, SystemParams, capacity,
                     derived_quantities, utility, validate)
from .analytic import (AnalyticPerformance, ModulationConstants, ServiceMoments,
                       StartServiceProbs, analyze, conditional_wait,
                       maximal_mean_delay, modulation_constants, performance,
                       service_moments, start_service_probs, start_service_recursion)
from .chain import (BoundarySolution, TruncatedChainSolution, boundary_solution,
                    eval_G, eval_g, numeric_mean_delay, truncated_chain_oracle)
from .sim import HotspotModel, SimConfig, SimResult, Strategy, replicate, run
from .optimize import (OptimalDeadline, StrategyComparison, SweepRow,
                       compare_strategies, optimal_deadline, sweep)

__version__ = "0.1.0"

__all__ = [
    "AnalyticPerformance", "BoundarySolution", "DerivedQuantities",
    "HotspotModel", "ModulationConstants", "OptimalDeadline", "Preference",
    "ServiceMoments", "SimConfig", "SimResult", "StartServiceProbs",
    "Strategy", "StrategyComparison", "SweepRow", "SystemParams",
    "TruncatedChainSolution", "analyze", "boundary_solution", "capacity",
    "compare_strategies", "conditional_wait", "derived_quantities", "eval_G",
    "eval_g", "maximal_mean_delay", "modulation_constants",
    "numeric_mean_delay", "optimal_deadline", "performance", "replicate",
    "run", "service_moments", "start_service_probs", "start_service_recursion",
    "sweep", "truncated_chain_oracle", "utility", "validate",
]
