"""Exact solution of the constant-log-utility invariant.

The cost ``C`` of a share vector ``q`` is the root of

    (1/N) * sum_j ln(C - q_j) = ln C0,

and always lies in ``[max(C0, q_max), q_max + C0]``. The solver works in the
log-offset ``u = ln(C - q_max)`` so that offsets many orders of magnitude
below ``C0`` stay representable when ``q_max`` is huge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from .errors import DomainError, NumericError
from .market import MarketState, Security, materialize_shares, security_mask

logger = logging.getLogger(__name__)

DEFAULT_MAX_OUTCOMES = 2**20


@dataclass(frozen=True)
class SolveConfig:
    abs_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class CostSolution:
    cost: float
    log_offset: float
    q_max: float
    residual: float
    iterations: int
    N: int

    @property
    def offset(self) -> float:
        """``C - q_max``."""
        return math.exp(self.log_offset)


def invariant_residual(q: np.ndarray, C: float, C0: float) -> float:
    """``(1/N) sum ln(C - q_j) - ln C0`` evaluated directly."""
    q = np.asarray(q, dtype=np.float64)
    return float(np.mean(np.log(C - q)) - math.log(C0))


def _compress(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q)
    if q.ndim != 1 or q.size == 0:
        raise DomainError("share vector must be a non-empty 1-d array")
    if np.any(q < 0):
        raise DomainError("share quantities must be nonnegative")
    values, counts = np.unique(q, return_counts=True)
    return values.astype(np.float64), counts.astype(np.float64)


class _LogOffsetInvariant:
    """Residual and slope of the invariant as functions of ``u``."""

    def __init__(self, values: np.ndarray, counts: np.ndarray, C0: float):
        self.q_max = float(values.max())
        gaps = self.q_max - values
        with np.errstate(divide="ignore"):
            self.log_gaps = np.log(gaps)
        self.weights = counts / counts.sum()
        self.log_c0 = math.log(C0)

    def residual(self, u: float) -> float:
        return float(np.dot(self.weights, np.logaddexp(u, self.log_gaps)) - self.log_c0)

    def slope(self, u: float) -> float:
        return float(np.dot(self.weights, expit(u - self.log_gaps)))


def solve_cost_compressed(
    values: np.ndarray,
    counts: np.ndarray,
    C0: float,
    cfg: SolveConfig | None = None,
) -> CostSolution:
    """Solve over ``(value, multiplicity)`` pairs; O(number of distinct values)."""
    cfg = cfg or SolveConfig()
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if values.shape != counts.shape or values.size == 0:
        raise DomainError("values and counts must be non-empty and of equal length")
    if np.any(counts <= 0):
        raise DomainError("multiplicities must be positive")
    if np.any(values < 0):
        raise DomainError("share quantities must be nonnegative")
    if not C0 > 0:
        raise DomainError(f"C0 must be positive, got {C0}")
    N = int(round(counts.sum()))

    inv = _LogOffsetInvariant(values, counts, C0)
    top_share = float(inv.weights[np.isneginf(inv.log_gaps)].sum())

    if top_share >= 1.0:
        # every outcome sits at q_max: C = q_max + C0 exactly
        return CostSolution(inv.q_max + C0, inv.log_c0, inv.q_max, 0.0, 0, N)

    widest = float(np.max(np.exp(inv.log_gaps)))
    lo = (inv.log_c0 - (1.0 - top_share) * math.log(C0 + widest)) / top_share
    if C0 > inv.q_max:
        lo = max(lo, math.log(C0 - inv.q_max))
    hi = inv.log_c0

    u = hi
    iterations = 0
    g = inv.residual(u)
    while abs(g) > cfg.abs_tol:
        if iterations >= cfg.max_iter:
            bracket = (inv.q_max + math.exp(lo), inv.q_max + math.exp(hi))
            raise NumericError(
                f"invariant solve did not converge in {cfg.max_iter} iterations (residual {g:.3e})",
                bracket=bracket,
            )
        iterations += 1
        if g > 0:
            hi = u
        else:
            lo = u
        step = u - g / inv.slope(u)
        if lo < step < hi:
            u = step
        else:
            u = 0.5 * (lo + hi)
            if u in (lo, hi):
                break
        g = inv.residual(u)
        logger.debug("solve iter=%d u=%.17g residual=%.3e", iterations, u, g)

    if abs(g) > cfg.abs_tol:
        bracket = (inv.q_max + math.exp(lo), inv.q_max + math.exp(hi))
        raise NumericError(
            f"bracket collapsed before reaching tolerance (residual {g:.3e})", bracket=bracket
        )

    offset = min(math.exp(u), C0)
    cost = inv.q_max + offset
    floor = max(C0, inv.q_max)
    slack = 1e-12 * floor
    if cost < floor - slack or cost > inv.q_max + C0 + slack:
        raise NumericError(
            f"cost {cost!r} escaped [{floor!r}, {inv.q_max + C0!r}]",
            bracket=(floor, inv.q_max + C0),
        )
    return CostSolution(cost, u, inv.q_max, g, iterations, N)


def solve_exact(q: np.ndarray, C0: float, cfg: SolveConfig | None = None) -> CostSolution:
    values, counts = _compress(q)
    return solve_cost_compressed(values, counts, C0, cfg)


def solve_cost_exact(q: np.ndarray, C0: float, cfg: SolveConfig | None = None) -> float:
    """Cost ``C(q)`` for an explicit share vector."""
    return solve_exact(q, C0, cfg).cost


def log_distances(q: np.ndarray, solution: CostSolution) -> np.ndarray:
    """``ln(C - q_j)`` rebuilt from the log-offset, exact even when ``C`` rounds to ``q_max``."""
    q = np.asarray(q, dtype=np.float64)
    if q.size != solution.N:
        raise DomainError(f"share vector has {q.size} outcomes, solution has {solution.N}")
    with np.errstate(divide="ignore"):
        log_gaps = np.log(solution.q_max - q)
    return np.logaddexp(solution.log_offset, log_gaps)


def inverse_outcome_price(q: np.ndarray, solution: CostSolution, j: int) -> float:
    """``1 / p_j = sum_i (C - q_j) / (C - q_i)`` computed from the log-offset."""
    q = np.asarray(q, dtype=np.float64)
    if not 0 <= j < q.size:
        raise DomainError(f"outcome {j} outside [0, {q.size})")
    distances = log_distances(q, solution)
    return float(np.exp(distances[j] - distances).sum())


def solution_prices(q: np.ndarray, solution: CostSolution) -> np.ndarray:
    """Outcome prices at a solved cost; never singular."""
    return softmax(-log_distances(q, solution))


def solution_security_price(q: np.ndarray, solution: CostSolution, security: Security) -> float:
    prices = solution_prices(q, solution)
    return float(prices[security_mask(security, prices.size)].sum())


def cost_difference(before: CostSolution, after: CostSolution) -> float:
    """``C(after) - C(before)`` from the integral ``q_max`` shift and the two offsets."""
    shift = after.q_max - before.q_max
    if shift == 0:
        return before.offset * math.expm1(after.log_offset - before.log_offset)
    return shift + (after.offset - before.offset)


def trade_cost(
    state: MarketState,
    security: Security,
    qty: int,
    cfg: SolveConfig | None = None,
    max_outcomes: int = DEFAULT_MAX_OUTCOMES,
) -> float:
    """``C(q_after) - C(q_before)`` for buying ``qty`` shares of ``security``."""
    if qty == 0:
        return 0.0
    after = state.with_purchase(security, qty)
    before_q = materialize_shares(state, max_outcomes)
    after_q = materialize_shares(after, max_outcomes)
    before = solve_exact(before_q, state.C0, cfg)
    later = solve_exact(after_q, state.C0, cfg)
    return cost_difference(before, later)
