"""Constant-factor clause pricing from random parity constraints.

The price of a security ``S`` is ``W(S) / (W(S) + W(not S))`` where ``W`` sums
the outcome weights ``w = 1 / (C - q)``. Each side's sum is estimated by
drawing parity hashes ``A x = b (mod 2)`` with ``i = 0..n`` rows, asking a
k-MAP oracle for the k-th largest feasible weight and combining the medians
over ``T`` draws as ``M_0 + sum_i M_{i+1} 2**i``.

The bundled oracle enumerates all ``2**n`` outcomes, which caps ``n``; any
object with a matching ``k_largest`` method can stand in for it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import CapacityError, DomainError, SamplingError
from .exact import SolveConfig, log_distances, solve_exact
from .market import Clause2, MarketState, materialize_shares
from .rng import make_rng

logger = logging.getLogger(__name__)

ALPHA_STAR = 0.000762
WISH_MAX_EVENTS = 20


@dataclass(frozen=True)
class ParityHash:
    """Constraint ``A x = b (mod 2)`` over the ``n`` event bits of an outcome."""

    A: np.ndarray
    b: np.ndarray

    @property
    def rows(self) -> int:
        return int(self.A.shape[0])

    @classmethod
    def sample(cls, rows: int, n: int, rng: np.random.Generator) -> "ParityHash":
        if not 0 <= rows <= n:
            raise DomainError(f"hash rows must lie in [0, {n}], got {rows}")
        A = rng.integers(0, 2, size=(rows, n), dtype=np.uint8)
        b = rng.integers(0, 2, size=rows, dtype=np.uint8)
        return cls(A, b)

    def feasible(self, bits: np.ndarray) -> np.ndarray:
        """Boolean mask of the outcome rows of ``bits`` that satisfy the constraint."""
        if self.rows == 0:
            return np.ones(bits.shape[0], dtype=bool)
        parity = (bits.astype(np.int64) @ self.A.T.astype(np.int64)) & 1
        return np.all(parity == self.b, axis=1)


@dataclass(frozen=True)
class WishConfig:
    delta: float = 0.05
    alpha: float = ALPHA_STAR
    c: int = 2
    k: int = 12
    max_events: int = WISH_MAX_EVENTS

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.c < 2:
            raise DomainError(f"c must be at least 2, got {self.c}")
        if self.k < 1:
            raise DomainError(f"k must be at least 1, got {self.k}")

    @property
    def weakened(self) -> bool:
        return self.alpha > ALPHA_STAR

    def rounds(self, n: int) -> int:
        """Hash draws per constraint count: ``ceil(ln(n / delta) / alpha)``."""
        return max(1, math.ceil(math.log(max(n, 1) / self.delta) / self.alpha))


class KMapOracle(Protocol):
    def k_largest(self, parity: ParityHash, side: np.ndarray, k: int) -> float: ...


class EnumerationKMapOracle:
    """k-MAP answers by scanning every outcome."""

    def __init__(self, weights: np.ndarray, n: int, max_events: int = WISH_MAX_EVENTS):
        if n > max_events:
            raise CapacityError(f"n={n} exceeds the enumeration bound {max_events}")
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (2**n,):
            raise DomainError(f"expected {2**n} weights, got shape {weights.shape}")
        if np.any(weights <= 0):
            raise DomainError("weights must be strictly positive")
        self.weights = weights
        self.n = n
        outcomes = np.arange(2**n, dtype=np.int64)
        self.bits = ((outcomes[:, None] >> np.arange(n)) & 1).astype(np.uint8)
        self.calls = 0

    def k_largest(self, parity: ParityHash, side: np.ndarray, k: int) -> float:
        self.calls += 1
        chosen = self.weights[side & parity.feasible(self.bits)]
        if chosen.size < k:
            return 0.0
        return float(np.partition(chosen, chosen.size - k)[chosen.size - k])


def k_map_constrained(
    w: np.ndarray,
    parity: ParityHash,
    side: np.ndarray,
    k: int,
    max_events: int = WISH_MAX_EVENTS,
) -> float:
    """k-th largest weight among outcomes on ``side`` that satisfy ``parity``; 0 if fewer than k."""
    w = np.asarray(w, dtype=np.float64)
    n = w.size.bit_length() - 1
    if 2**n != w.size:
        raise DomainError("weight vector length must be a power of two")
    return EnumerationKMapOracle(w, n, max_events).k_largest(parity, np.asarray(side, dtype=bool), k)


@dataclass
class WishEstimate:
    price: float
    total: float = 0.0
    total_complement: float = 0.0
    medians: list[float] = field(default_factory=list)
    medians_complement: list[float] = field(default_factory=list)
    rounds: int = 0
    hash_draws: int = 0
    queries: int = 0

    def as_dict(self) -> dict[str, object]:
        return {
            "price": self.price,
            "N": self.total,
            "N_complement": self.total_complement,
            "medians": self.medians,
            "medians_complement": self.medians_complement,
            "T": self.rounds,
            "hash_draws": self.hash_draws,
            "queries": self.queries,
        }


def _aggregate(medians: np.ndarray) -> float:
    n = medians.size - 1
    return float(medians[0] + sum(medians[i + 1] * 2.0**i for i in range(n)))


def wish_estimate(
    weights: np.ndarray,
    side: np.ndarray,
    n: int,
    cfg: WishConfig,
    seed: int,
    oracle: KMapOracle | None = None,
) -> WishEstimate:
    """Estimate ``W(side) / W(all)`` for an arbitrary side mask."""
    side = np.asarray(side, dtype=bool)
    if side.all():
        return WishEstimate(1.0)
    if not side.any():
        return WishEstimate(0.0)
    smaller = int(min(side.sum(), side.size - side.sum()))
    if smaller < cfg.k:
        raise CapacityError(
            f"a side holds {smaller} outcomes but k-MAP needs k={cfg.k}; use more events or a smaller k"
        )
    if oracle is None:
        oracle = EnumerationKMapOracle(weights, n, cfg.max_events)
    if cfg.weakened:
        logger.warning("alpha=%g above %g; the approximation guarantee no longer holds", cfg.alpha, ALPHA_STAR)

    T = cfg.rounds(n)
    inside = np.zeros((n + 1, T))
    outside = np.zeros((n + 1, T))
    other = ~side
    for rows in range(n + 1):
        for t in range(T):
            parity = ParityHash.sample(rows, n, make_rng(seed, rows, t))
            inside[rows, t] = oracle.k_largest(parity, side, cfg.k)
            outside[rows, t] = oracle.k_largest(parity, other, cfg.k)
        logger.debug("wish rows=%d done (%d draws)", rows, T)

    lower = (T - 1) // 2
    medians = np.sort(inside, axis=1)[:, lower]
    medians_complement = np.sort(outside, axis=1)[:, lower]
    total = _aggregate(medians)
    total_complement = _aggregate(medians_complement)
    if total + total_complement == 0.0:
        raise SamplingError(f"every k-MAP query returned fewer than k={cfg.k} outcomes")
    return WishEstimate(
        price=total / (total + total_complement),
        total=total,
        total_complement=total_complement,
        medians=medians.tolist(),
        medians_complement=medians_complement.tolist(),
        rounds=T,
        hash_draws=(n + 1) * T,
        queries=2 * (n + 1) * T,
    )


def clause_weights(
    state: MarketState, solve_cfg: SolveConfig | None = None, max_events: int = WISH_MAX_EVENTS
) -> np.ndarray:
    """Outcome weights ``1 / (C - q)`` at the exact cost of ``state``."""
    if state.n_events is None:
        raise DomainError("clause pricing needs a Boolean market (n_events)")
    if state.n_events > max_events:
        raise CapacityError(f"n={state.n_events} exceeds the enumeration bound {max_events}")
    q = materialize_shares(state)
    return np.exp(-log_distances(q, solve_exact(q, state.C0, solve_cfg)))


def wish_price_report(
    state: MarketState,
    security: Clause2,
    cfg: WishConfig,
    seed: int,
    solve_cfg: SolveConfig | None = None,
) -> WishEstimate:
    if not isinstance(security, Clause2):
        raise DomainError("hash-based pricing only supports two-literal clause securities")
    weights = clause_weights(state, solve_cfg, cfg.max_events)
    security.validate(state.N, state.n_events)
    side = security.mask(np.arange(state.N, dtype=np.int64))
    return wish_estimate(weights, side, state.n_events, cfg, seed)


def wish_price(state: MarketState, s: Clause2, cfg: WishConfig, seed: int) -> float:
    return wish_price_report(state, s, cfg, seed).price


@dataclass(frozen=True)
class WishBounds:
    lower: float
    upper: float

    @property
    def ratio(self) -> float:
        return self.upper / self.lower if self.lower else math.inf


def level_weights(weights: np.ndarray, side: np.ndarray, n: int) -> np.ndarray:
    """``b_i`` for ``i = 0..n``: the ``2**i``-th largest weight on ``side``, 0 past the end."""
    ordered = np.sort(np.asarray(weights, dtype=np.float64)[np.asarray(side, dtype=bool)])[::-1]
    levels = np.zeros(n + 1)
    for i in range(n + 1):
        if 2**i <= ordered.size:
            levels[i] = ordered[2**i - 1]
    return levels


def bound_factor(c: int, complement: bool) -> int:
    """Deterministic ceiling on ``U / L`` for one side's sandwich."""
    return 2 ** (c + 1) if complement else 2 ** (c + 2)


def wish_bounds(
    weights: np.ndarray, side: np.ndarray, n: int, c: int = 2, complement: bool = False
) -> WishBounds:
    """Sandwich ``[L, U]`` for the aggregate of one side.

    The clause side uses ``b_{min(i+2, n)}`` below and ``b_{max(i-c, 0)}`` above;
    the complement side uses ``b_{min(i+c+1, n)}`` below and ``b_i`` above.
    """
    b = level_weights(weights, side, n)
    if complement:
        lower = b[0] + sum(b[min(i + c + 1, n)] * 2.0**i for i in range(n))
        upper = b[0] + sum(b[i] * 2.0**i for i in range(n))
    else:
        lower = b[0] + sum(b[min(i + 2, n)] * 2.0**i for i in range(n))
        upper = b[0] + sum(b[max(i - c, 0)] * 2.0**i for i in range(n))
    return WishBounds(float(lower), float(upper))


def price_band(clause: WishBounds, complement: WishBounds) -> tuple[float, float]:
    """Range of ``N / (N + N')`` when both aggregates sit inside their sandwiches."""
    low = clause.lower / (clause.lower + complement.upper)
    high = clause.upper / (clause.upper + complement.lower) if clause.upper else 0.0
    return low, high
