"""Market state, securities and price formulas shared by every solver.

Outcomes are indexed ``0..N-1``. In Boolean markets an outcome index is an
``n``-bit assignment where event ``e`` (1-based) occupies bit ``e - 1``, so
event 1 is the least-significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import CapacityError, DomainError, SingularityError

PRICE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EventLiteral:
    event: int
    positive: bool = True

    def holds(self, outcome: int) -> bool:
        return bool((outcome >> (self.event - 1)) & 1) == self.positive

    def mask(self, outcomes: np.ndarray) -> np.ndarray:
        bits = (outcomes >> (self.event - 1)) & 1
        return bits == (1 if self.positive else 0)

    def __str__(self) -> str:
        return f"{'' if self.positive else '-'}{self.event}"


@dataclass(frozen=True)
class Clause2:
    """Pays when either literal holds."""

    first: EventLiteral
    second: EventLiteral

    def __post_init__(self) -> None:
        for lit in (self.first, self.second):
            if lit.event < 1:
                raise DomainError(f"event indices are 1-based, got {lit.event}")
        if self.first.event == self.second.event:
            raise DomainError(f"clause repeats event {self.first.event}")

    @classmethod
    def from_ints(cls, a: int, b: int) -> "Clause2":
        """Build from DIMACS-style signed literals, e.g. ``(1, -2)``."""
        if a == 0 or b == 0:
            raise DomainError("literal 0 is not a variable")
        return cls(EventLiteral(abs(a), a > 0), EventLiteral(abs(b), b > 0))

    def holds(self, outcome: int) -> bool:
        return self.first.holds(outcome) or self.second.holds(outcome)

    def mask(self, outcomes: np.ndarray) -> np.ndarray:
        return self.first.mask(outcomes) | self.second.mask(outcomes)

    def validate(self, N: int, n_events: int | None) -> None:
        if n_events is None:
            raise DomainError("clause securities need a Boolean market (n_events)")
        for lit in (self.first, self.second):
            if lit.event > n_events:
                raise DomainError(f"event {lit.event} exceeds n_events={n_events}")

    def __str__(self) -> str:
        return f"({self.first} v {self.second})"


@dataclass(frozen=True)
class Indicator:
    """Arrow-Debreu security on a single outcome."""

    outcome: int

    def holds(self, outcome: int) -> bool:
        return outcome == self.outcome

    def mask(self, outcomes: np.ndarray) -> np.ndarray:
        return outcomes == self.outcome

    def validate(self, N: int, n_events: int | None) -> None:
        if not 0 <= self.outcome < N:
            raise DomainError(f"indicator outcome {self.outcome} outside [0, {N})")


@dataclass(frozen=True)
class Interval:
    """Pays on every outcome in the closed index range ``[lo, hi]``."""

    lo: int
    hi: int

    def holds(self, outcome: int) -> bool:
        return self.lo <= outcome <= self.hi

    def mask(self, outcomes: np.ndarray) -> np.ndarray:
        return (outcomes >= self.lo) & (outcomes <= self.hi)

    def validate(self, N: int, n_events: int | None) -> None:
        if not 0 <= self.lo <= self.hi < N:
            raise DomainError(f"interval [{self.lo}, {self.hi}] not inside [0, {N})")


Security = Union[Clause2, Indicator, Interval]


@dataclass(frozen=True)
class LedgerEntry:
    security: Security
    quantity: int


@dataclass
class MarketState:
    """Initial subsidy, outcome space and the ledger of purchases.

    Trades are applied one at a time; pricing functions only read the state.
    """

    C0: float
    N: int
    n_events: int | None = None
    ledger: list[LedgerEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.C0 > 0:
            raise DomainError(f"C0 must be positive, got {self.C0}")
        if self.N < 1:
            raise DomainError(f"N must be positive, got {self.N}")
        if self.n_events is not None:
            if self.n_events < 0 or self.N != 2**self.n_events:
                raise DomainError(f"N={self.N} does not equal 2**n_events for n_events={self.n_events}")
        for entry in self.ledger:
            self._check(entry.security, entry.quantity)

    @classmethod
    def boolean(cls, C0: float, n_events: int) -> "MarketState":
        return cls(C0=C0, N=2**n_events, n_events=n_events)

    def _check(self, security: Security, quantity: int) -> None:
        if isinstance(quantity, bool) or int(quantity) != quantity or quantity < 0:
            raise DomainError(f"quantities are nonnegative integers, got {quantity!r}")
        security.validate(self.N, self.n_events)

    def buy(self, security: Security, quantity: int) -> None:
        self._check(security, quantity)
        self.ledger.append(LedgerEntry(security, int(quantity)))

    def with_purchase(self, security: Security, quantity: int) -> "MarketState":
        after = MarketState(self.C0, self.N, self.n_events, list(self.ledger))
        after.buy(security, quantity)
        return after

    def is_interval_market(self) -> bool:
        return all(isinstance(entry.security, Interval) for entry in self.ledger)


def payout_for_outcome(state: MarketState, outcome_index: int) -> int:
    """Total payout owed by the market maker if ``outcome_index`` occurs."""
    if not 0 <= outcome_index < state.N:
        raise DomainError(f"outcome {outcome_index} outside [0, {state.N})")
    return sum(
        entry.quantity for entry in state.ledger if entry.security.holds(outcome_index)
    )


def materialize_shares(state: MarketState, max_outcomes: int | None = None) -> np.ndarray:
    """Explicit share vector ``q`` with ``q[j] = payout_for_outcome(state, j)``."""
    if max_outcomes is not None and state.N > max_outcomes:
        raise CapacityError(
            f"N={state.N} exceeds the explicit bound {max_outcomes}; use the approximate solver"
        )
    q = np.zeros(state.N, dtype=np.int64)
    outcomes: np.ndarray | None = None
    for entry in state.ledger:
        security = entry.security
        if isinstance(security, Interval):
            q[security.lo : security.hi + 1] += entry.quantity
        elif isinstance(security, Indicator):
            q[security.outcome] += entry.quantity
        else:
            if outcomes is None:
                outcomes = np.arange(state.N, dtype=np.int64)
            q[security.mask(outcomes)] += entry.quantity
    return q


def _weights(q: np.ndarray, C: float) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.size == 0:
        raise DomainError("empty share vector")
    q_max = float(q.max())
    if not C > q_max:
        raise SingularityError(f"cost {C} must exceed the maximum payout {q_max}")
    return 1.0 / (C - q)


def outcome_prices(q: np.ndarray, C: float) -> np.ndarray:
    """Normalised reciprocal prices ``(1/(C-q_j)) / sum_i 1/(C-q_i)``."""
    weights = _weights(q, C)
    return weights / weights.sum()


def outcome_price(q: np.ndarray, C: float, j: int) -> float:
    if not 0 <= j < len(q):
        raise DomainError(f"outcome {j} outside [0, {len(q)})")
    weights = _weights(q, C)
    return float(weights[j] / weights.sum())


def security_mask(security: Security, N: int) -> np.ndarray:
    """Boolean mask of the outcomes in ``[0, N)`` where ``security`` pays."""
    if isinstance(security, Interval):
        security.validate(N, None)
        mask = np.zeros(N, dtype=bool)
        mask[security.lo : security.hi + 1] = True
        return mask
    if isinstance(security, Indicator):
        security.validate(N, None)
        mask = np.zeros(N, dtype=bool)
        mask[security.outcome] = True
        return mask
    n_events = N.bit_length() - 1
    if 2**n_events != N:
        raise DomainError("clause pricing needs N to be a power of two")
    security.validate(N, n_events)
    return security.mask(np.arange(N, dtype=np.int64))


def security_price(q: np.ndarray, C: float, security: Security) -> float:
    """Sum of outcome prices over the outcomes where ``security`` pays."""
    prices = outcome_prices(q, C)
    return float(prices[security_mask(security, prices.size)].sum())
