"""CLUM pricing engine package."""

from .approx import (
    ApproxConfig,
    CostEstimate,
    ExplicitOracle,
    MaxStats,
    OracleInterface,
    approximate_cost,
    estimate_u2,
)
from .errors import (
    CapacityError,
    ClumError,
    DomainError,
    NumericError,
    SamplingError,
    SingularityError,
)
from .exact import (
    CostSolution,
    SolveConfig,
    cost_difference,
    inverse_outcome_price,
    solution_prices,
    solution_security_price,
    solve_cost_compressed,
    solve_cost_exact,
    trade_cost,
)
from .interval_tree import IntervalNode, IntervalOracle, IntervalTree, interval_security_price
from .ledger import load_ledger, save_ledger
from .market import (
    Clause2,
    EventLiteral,
    Indicator,
    Interval,
    MarketState,
    outcome_price,
    payout_for_outcome,
    security_mask,
    security_price,
)
from .reduction import ReductionReport, count_models_via_pricing, reduce_and_price
from .services import EngineContainer
from .settings import SettingsStore
from .twosat import TwoSatFormula, count_models_brute_force, parse_dimacs, two_sat_find_assignment
from .wish import (
    ParityHash,
    WishConfig,
    WishEstimate,
    bound_factor,
    k_map_constrained,
    price_band,
    wish_bounds,
    wish_price,
)

__all__ = [
    "ApproxConfig",
    "CapacityError",
    "Clause2",
    "ClumError",
    "CostEstimate",
    "CostSolution",
    "DomainError",
    "EngineContainer",
    "EventLiteral",
    "ExplicitOracle",
    "Indicator",
    "Interval",
    "IntervalNode",
    "IntervalOracle",
    "IntervalTree",
    "MarketState",
    "MaxStats",
    "NumericError",
    "OracleInterface",
    "ParityHash",
    "ReductionReport",
    "SamplingError",
    "SettingsStore",
    "SingularityError",
    "SolveConfig",
    "TwoSatFormula",
    "WishConfig",
    "WishEstimate",
    "approximate_cost",
    "cost_difference",
    "count_models_brute_force",
    "count_models_via_pricing",
    "estimate_u2",
    "interval_security_price",
    "inverse_outcome_price",
    "k_map_constrained",
    "load_ledger",
    "outcome_price",
    "parse_dimacs",
    "payout_for_outcome",
    "reduce_and_price",
    "save_ledger",
    "security_mask",
    "security_price",
    "solution_prices",
    "solution_security_price",
    "solve_cost_compressed",
    "solve_cost_exact",
    "trade_cost",
    "two_sat_find_assignment",
    "bound_factor",
    "price_band",
    "wish_bounds",
    "wish_price",
]
