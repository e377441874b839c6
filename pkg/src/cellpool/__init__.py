"""Capacity gains from base-station and spectrum sharing between two operators.

Two engines: a stochastic-geometry rate model evaluated by quadrature (with
a Monte Carlo cross-check), and a frame-level OFDMA simulator with a greedy
proportional-fair scheduler.
"""

__version__ = "0.1.0"

from .analytic import (QuadratureConfig, QuadratureError, RateResult, breakeven_ratio,
                       interference_integral, rate_flexroam, rate_merger, rate_nocoop, strategy_rate,
                       sweep, throughput)
from .oracle import McEstimate, estimate_rate
from .params import OperatorParams, RadioParams, Strategy, dbm_to_watt, baseline_operator
from .simulator import ScenarioConfig, ThroughputReport, compare_strategies, emit_cdf, run_scenario

__all__ = [
    "McEstimate", "OperatorParams", "QuadratureConfig", "QuadratureError", "RadioParams",
    "RateResult", "ScenarioConfig", "Strategy", "ThroughputReport", "breakeven_ratio",
    "compare_strategies", "dbm_to_watt", "emit_cdf", "estimate_rate", "interference_integral",
    "baseline_operator", "rate_flexroam", "rate_merger", "rate_nocoop", "run_scenario",
    "strategy_rate", "sweep", "throughput",
]
