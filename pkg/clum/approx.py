"""Randomised (1+2*eps)-approximation of the cost function.

The solver only needs two things from a market: the maximum payout with its
multiplicity, and uniform draws of outcome payouts. It binary-searches the
bracket ``[max(q_max, C0), q_max + C0]``, estimating the invariant at each
midpoint as an exact contribution from the maximal outcomes plus a Monte
Carlo mean over the rest.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DomainError, SamplingError, SingularityError
from .rng import spawn

logger = logging.getLogger(__name__)

REJECTION_FACTOR = 64
MAX_DRAWS = 2**27
DRAW_CHUNK = 2**20


@dataclass(frozen=True)
class MaxStats:
    q_max: int
    s_qmax: int

    def __post_init__(self) -> None:
        if self.q_max < 0 or self.s_qmax < 1:
            raise DomainError(f"invalid max statistics {self}")


class OracleInterface(Protocol):
    N: int

    def max_stats(self) -> MaxStats: ...

    def sample_outcome(self, rng: np.random.Generator) -> tuple[int, int]: ...

    def sample_payouts(self, rng: np.random.Generator, size: int) -> np.ndarray: ...


class ExplicitOracle:
    """Oracle over a materialised share vector."""

    def __init__(self, q: np.ndarray):
        self.q = np.asarray(q, dtype=np.int64)
        if self.q.ndim != 1 or self.q.size == 0:
            raise DomainError("share vector must be a non-empty 1-d array")
        self.N = int(self.q.size)
        q_max = int(self.q.max())
        self._stats = MaxStats(q_max, int(np.count_nonzero(self.q == q_max)))

    def max_stats(self) -> MaxStats:
        return self._stats

    def sample_outcome(self, rng: np.random.Generator) -> tuple[int, int]:
        index = int(rng.integers(0, self.N))
        return index, int(self.q[index])

    def sample_payouts(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.q[rng.integers(0, self.N, size=size)]


@dataclass(frozen=True)
class ApproxConfig:
    epsilon: float = 0.05
    delta: float = 0.05
    workers: int = 1
    rejection_factor: int = REJECTION_FACTOR
    max_draws: int = MAX_DRAWS

    def __post_init__(self) -> None:
        if self.max_draws < 1:
            raise DomainError(f"max_draws must be positive, got {self.max_draws}")
        if not 0 < self.epsilon <= 0.5:
            raise DomainError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.workers < 1 or self.rejection_factor < 1:
            raise DomainError("workers and rejection_factor must be at least 1")


@dataclass(frozen=True)
class RoundTrace:
    a: float
    b: float
    u_hat: float

    def as_dict(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "u_hat": self.u_hat}


@dataclass
class CostEstimate:
    c_hat: float
    epsilon: float
    delta: float
    iterations: int = 0
    trace: list[RoundTrace] = field(default_factory=list)
    terminated_early: bool = False
    bracket: tuple[float, float] = (0.0, 0.0)
    samples: int = 0

    @property
    def error_factor(self) -> float:
        return 1.0 + 2.0 * self.epsilon


def round_budget(epsilon: float) -> int:
    """``ceil(log2(1/eps))``: the most rounds the binary search can take."""
    return max(1, math.ceil(math.log2(1.0 / epsilon)))


def sample_size(epsilon: float, delta: float, C0: float, q_max: int) -> int:
    L = max(0.0, math.log(C0 + q_max))
    if L == 0.0:
        return 1
    T = round_budget(epsilon)
    return max(1, math.ceil(T * L * L * math.log(2.0 / delta) / (2.0 * epsilon * epsilon)))


def u1(c: float, stats: MaxStats, N: int) -> float:
    """Exact invariant contribution of the outcomes at ``q_max``."""
    if not c > stats.q_max:
        raise SingularityError(f"c={c} must exceed q_max={stats.q_max}")
    return stats.s_qmax / N * math.log(c - stats.q_max)


def _draw_below_max(
    oracle: OracleInterface,
    rng: np.random.Generator,
    needed: int,
    q_max: int,
    acceptance: float,
    budget: int,
) -> np.ndarray:
    accepted: list[np.ndarray] = []
    have = 0
    attempts = 0
    while have < needed:
        if attempts >= budget:
            raise SamplingError(
                f"rejection sampler used {attempts} draws for {have}/{needed} samples"
            )
        wanted = (needed - have) / acceptance * 1.1 + 16
        batch = int(min(budget - attempts, wanted, DRAW_CHUNK))
        payouts = oracle.sample_payouts(rng, batch)
        attempts += batch
        kept = payouts[payouts < q_max]
        accepted.append(kept)
        have += kept.size
    return np.concatenate(accepted)[:needed]


def estimate_u2(
    c_hat: float,
    stats: MaxStats,
    oracle: OracleInterface,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
    C0: float,
    workers: int = 1,
    rejection_factor: int = REJECTION_FACTOR,
    max_draws: int = MAX_DRAWS,
) -> float:
    """Monte Carlo estimate of the non-maximal part of the invariant.

    Each worker stops after ``rejection_factor * m / acceptance`` draws or its
    share of ``max_draws``, whichever comes first.
    """
    N = oracle.N
    if stats.s_qmax >= N:
        return 0.0
    L = max(0.0, math.log(C0 + stats.q_max))
    if L == 0.0:
        return 0.0
    m = sample_size(epsilon, delta, C0, stats.q_max)
    acceptance = (N - stats.s_qmax) / N
    budget = min(math.ceil(rejection_factor * m / acceptance), max_draws)

    if workers <= 1:
        payouts = _draw_below_max(oracle, rng, m, stats.q_max, acceptance, budget)
    else:
        shares = [m // workers + (1 if i < m % workers else 0) for i in range(workers)]
        streams = spawn(rng, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(
                lambda job: _draw_below_max(
                    oracle, job[0], job[1], stats.q_max, acceptance,
                    min(math.ceil(rejection_factor * job[1] / acceptance), math.ceil(max_draws / workers)),
                ),
                [(stream, share) for stream, share in zip(streams, shares) if share],
            )
            payouts = np.concatenate(list(parts))

    logs = np.log(c_hat - payouts.astype(np.float64))
    return acceptance * float(logs.mean())


def approximate_cost(
    C0: float,
    oracle: OracleInterface,
    epsilon: float,
    delta: float,
    rng: np.random.Generator,
    workers: int = 1,
    rejection_factor: int = REJECTION_FACTOR,
    max_draws: int = MAX_DRAWS,
) -> CostEstimate:
    """Binary search for ``C`` to within a factor ``1 + 2*eps`` w.p. ``1 - delta``."""
    if not 0 < epsilon <= 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not C0 > 0:
        raise DomainError(f"C0 must be positive, got {C0}")

    stats = oracle.max_stats()
    N = oracle.N
    if stats.s_qmax >= N:
        exact = stats.q_max + C0
        return CostEstimate(exact, epsilon, delta, bracket=(exact, exact))

    a = float(max(stats.q_max, C0))
    b = float(stats.q_max + C0)
    target = math.log(C0)
    limit = math.exp(epsilon)
    rounds = round_budget(epsilon)
    estimate = CostEstimate(0.0, epsilon, delta)
    c_hat = 0.5 * (a + b)

    while b / a > limit and estimate.iterations < rounds:
        c_hat = 0.5 * (a + b)
        u2_hat = estimate_u2(
            c_hat, stats, oracle, epsilon, delta, rng, C0, workers, rejection_factor, max_draws
        )
        u_hat = u1(c_hat, stats, N) + u2_hat
        estimate.iterations += 1
        estimate.samples += sample_size(epsilon, delta, C0, stats.q_max)
        estimate.trace.append(RoundTrace(a, b, u_hat))
        logger.debug("round %d bracket=[%.12g, %.12g] u_hat=%.12g", estimate.iterations, a, b, u_hat)
        if u_hat > target + epsilon:
            b = c_hat
        elif u_hat <= target - epsilon:
            a = c_hat
        else:
            estimate.terminated_early = True
            break

    if not estimate.terminated_early:
        c_hat = 0.5 * (a + b)
    estimate.c_hat = c_hat
    estimate.bracket = (a, b)
    return estimate


def approximate_cost_with(
    C0: float, oracle: OracleInterface, cfg: ApproxConfig, rng: np.random.Generator
) -> CostEstimate:
    return approximate_cost(
        C0, oracle, cfg.epsilon, cfg.delta, rng, cfg.workers, cfg.rejection_factor, cfg.max_draws
    )
