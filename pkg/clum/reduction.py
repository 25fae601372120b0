"""Counting 2-SAT models by pricing an indicator security.

Every clause becomes a security of which ``q = ceil(C0 * (2**n - 1))`` shares
are bought. A satisfying assignment then carries the maximum payout ``k*q``
and ``floor(1 / p_omega)`` equals the number of models.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import CapacityError, DomainError, NumericError
from .exact import CostSolution, SolveConfig, inverse_outcome_price, solve_exact
from .market import MarketState, materialize_shares
from .twosat import TwoSatFormula, two_sat_find_assignment

logger = logging.getLogger(__name__)

REDUCTION_MAX_EVENTS = 16
PRECISION_GUARD = 1e-6
_TIGHTEST_TOL = 1e-15


@dataclass(frozen=True)
class ReductionReport:
    count: int
    assignment: int | None
    inverse_price: float
    slack: float
    q: int
    k: int
    cost: float
    subsidy_margin: float
    tolerance: float

    @property
    def price(self) -> float:
        return 1.0 / self.inverse_price if self.inverse_price else 0.0


def clause_quantity(C0: float, n: int) -> int:
    return math.ceil(C0 * (2**n - 1))


def build_reduction_market(formula: TwoSatFormula, C0: float = 1.0) -> MarketState:
    state = MarketState.boolean(C0, formula.n)
    q = clause_quantity(C0, formula.n)
    for clause in formula.clauses:
        state.buy(clause, q)
    return state


def _solve_with_guard(
    shares, assignment: int, C0: float, cfg: SolveConfig, guard: float
) -> tuple[CostSolution, float, float]:
    tol = cfg.abs_tol
    while True:
        solution = solve_exact(shares, C0, SolveConfig(tol, cfg.max_iter))
        inverse = inverse_outcome_price(shares, solution, assignment)
        fraction = inverse - math.floor(inverse)
        if fraction <= 1.0 - guard:
            return solution, inverse, tol
        if tol <= _TIGHTEST_TOL:
            raise NumericError(
                f"1/p_omega = {inverse!r} sits within {guard} below an integer",
                bracket=(math.floor(inverse), math.floor(inverse) + 1),
            )
        logger.debug("precision guard tripped at tol=%g (1/p=%r); tightening", tol, inverse)
        tol = max(tol * 1e-3, _TIGHTEST_TOL)


def reduce_and_price(
    formula: TwoSatFormula,
    C0: float = 1.0,
    cfg: SolveConfig | None = None,
    max_events: int = REDUCTION_MAX_EVENTS,
    guard: float = PRECISION_GUARD,
) -> ReductionReport:
    if not C0 > 0:
        raise DomainError(f"C0 must be positive, got {C0}")
    if formula.n > max_events:
        raise CapacityError(f"n={formula.n} exceeds the pricing bound {max_events}")
    cfg = cfg or SolveConfig()
    q = clause_quantity(C0, formula.n)

    assignment = two_sat_find_assignment(formula)
    if assignment is None:
        return ReductionReport(0, None, 0.0, 0.0, q, formula.k, float("nan"), float("nan"), cfg.abs_tol)
    if formula.k >= 2**formula.n:
        raise DomainError(f"k={formula.k} clauses must stay below N=2**{formula.n} to price a satisfiable formula")

    state = build_reduction_market(formula, C0)
    shares = materialize_shares(state)
    solution, inverse, tol = _solve_with_guard(shares, assignment, C0, cfg, guard)
    count = math.floor(inverse)
    # C - k*q is the offset, since the satisfying assignment attains q_max = k*q
    margin = C0 - solution.offset
    logger.debug(
        "reduction n=%d k=%d q=%d count=%d slack=%.3e", formula.n, formula.k, q, count, inverse - count
    )
    return ReductionReport(
        count=count,
        assignment=assignment,
        inverse_price=inverse,
        slack=inverse - count,
        q=q,
        k=formula.k,
        cost=solution.cost,
        subsidy_margin=margin,
        tolerance=tol,
    )


def count_models_via_pricing(
    formula: TwoSatFormula,
    C0: float = 1.0,
    cfg: SolveConfig | None = None,
    max_events: int = REDUCTION_MAX_EVENTS,
) -> int:
    return reduce_and_price(formula, C0, cfg, max_events).count
