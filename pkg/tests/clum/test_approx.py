import math

import numpy as np
import pytest

from clum.approx import (
    DRAW_CHUNK,
    MAX_DRAWS,
    ApproxConfig,
    CostEstimate,
    ExplicitOracle,
    MaxStats,
    approximate_cost,
    estimate_u2,
    round_budget,
    sample_size,
    u1,
)
from clum.errors import DomainError, SamplingError, SingularityError
from clum.exact import solve_cost_compressed, solve_cost_exact
from clum.interval_tree import IntervalOracle, IntervalTree
from clum.rng import make_rng


def _assert_search_shape(estimate: CostEstimate) -> None:
    assert estimate.iterations <= round_budget(estimate.epsilon)
    if estimate.trace:
        first = estimate.trace[0]
        assert first.b / first.a <= 2.0
    # every non-breaking round halves the bracket
    steps = estimate.trace if not estimate.terminated_early else estimate.trace[:-1]
    for before, after in zip(steps, estimate.trace[1:]):
        assert after.b - after.a == pytest.approx((before.b - before.a) / 2, rel=1e-12)
    for before, after in zip(estimate.trace, estimate.trace[1:]):
        assert before.a <= after.a <= after.b <= before.b
    low, high = estimate.bracket
    assert low <= estimate.c_hat <= high
    if estimate.trace:
        assert estimate.trace[-1].a <= low <= high <= estimate.trace[-1].b


def _bracket_holds(estimate: CostEstimate, exact: float) -> bool:
    rounds = [(t.a, t.b) for t in estimate.trace] + [estimate.bracket]
    return all(a * (1 - 1e-12) <= exact <= b * (1 + 1e-12) for a, b in rounds)


def test_u1_examples() -> None:
    assert u1(3.0, MaxStats(2, 1), 4) == 0.0
    assert u1(4.0, MaxStats(2, 1), 4) == pytest.approx(0.25 * math.log(2))
    assert u1(7.0, MaxStats(5, 8), 8) == pytest.approx(math.log(2.0))
    with pytest.raises(SingularityError):
        u1(2.0, MaxStats(2, 1), 4)


def test_round_budget_and_sample_size() -> None:
    assert round_budget(0.02) == 6
    assert round_budget(0.5) == 1
    assert sample_size(0.05, 0.05, 0.5, 0) == 1
    m = sample_size(0.05, 0.05, 1.0, 9)
    L = math.log(10.0)
    assert m == math.ceil(5 * L * L * math.log(2.0 / 0.05) / (2.0 * 0.05 * 0.05))


def test_estimate_u2_all_max_is_zero() -> None:
    oracle = ExplicitOracle(np.full(16, 3))
    assert estimate_u2(4.0, oracle.max_stats(), oracle, 0.1, 0.1, make_rng(0), 1.0) == 0.0


def test_estimate_u2_zero_variance() -> None:
    q = np.array([9] * 3 + [4] * 13)
    oracle = ExplicitOracle(q)
    u2 = estimate_u2(10.0, oracle.max_stats(), oracle, 0.2, 0.2, make_rng(1), 1.0)
    assert u2 == pytest.approx(13 / 16 * math.log(6.0), rel=1e-12)


def test_estimate_u2_within_epsilon_of_enumeration() -> None:
    rng = np.random.default_rng(42)
    q = rng.integers(0, 30, size=2**10)
    oracle = ExplicitOracle(q)
    stats = oracle.max_stats()
    c_hat = stats.q_max + 1.5
    rest = q[q < stats.q_max]
    exact = rest.size / q.size * float(np.mean(np.log(c_hat - rest)))

    misses = 0
    for seed in range(40):
        estimate = estimate_u2(c_hat, stats, oracle, 0.05, 0.05, make_rng(seed), 1.0)
        misses += abs(estimate - exact) > 0.05
    assert misses <= 2


def test_estimate_u2_parallel_is_reproducible() -> None:
    q = np.random.default_rng(7).integers(0, 100, size=4096)
    oracle = ExplicitOracle(q)
    stats = oracle.max_stats()
    runs = [
        estimate_u2(110.0, stats, oracle, 0.1, 0.1, make_rng(5), 1.0, workers=4)
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_rejection_budget_exhaustion() -> None:
    class StuckOracle(ExplicitOracle):
        def sample_payouts(self, rng, size):
            return np.full(size, self.max_stats().q_max)

    oracle = StuckOracle(np.array([5, 0, 0, 0]))
    with pytest.raises(SamplingError):
        estimate_u2(6.0, oracle.max_stats(), oracle, 0.2, 0.2, make_rng(0), 1.0, rejection_factor=2)


def test_zero_ledger_returns_c0() -> None:
    estimate = approximate_cost(3.0, ExplicitOracle(np.zeros(64)), 0.05, 0.05, make_rng(0))
    assert estimate.c_hat == 3.0
    assert estimate.iterations == 0
    assert estimate.bracket == (3.0, 3.0)


def test_parameter_validation() -> None:
    oracle = ExplicitOracle(np.zeros(4))
    for epsilon, delta in ((0.0, 0.1), (0.6, 0.1), (0.1, 0.0), (0.1, 1.0)):
        with pytest.raises(DomainError):
            approximate_cost(1.0, oracle, epsilon, delta, make_rng(0))
        with pytest.raises(DomainError):
            ApproxConfig(epsilon=epsilon, delta=delta)


@pytest.mark.parametrize(("epsilon", "delta"), [(0.05, 0.05), (0.02, 0.1)])
def test_explicit_ledgers_land_in_band(epsilon: float, delta: float) -> None:
    rng = np.random.default_rng(2024)
    q = rng.integers(0, 40, size=2**12)
    C0 = 4.0
    exact = solve_cost_exact(q, C0)
    oracle = ExplicitOracle(q)

    hits = 0
    seeds = 30
    for seed in range(seeds):
        estimate = approximate_cost(C0, oracle, epsilon, delta, make_rng(seed))
        _assert_search_shape(estimate)
        hits += exact / estimate.error_factor <= estimate.c_hat <= exact * estimate.error_factor
    assert hits >= math.floor((1 - delta) * seeds)


def test_interval_ledger_lands_in_band() -> None:
    rng = np.random.default_rng(9)
    N = 2**16
    tree = IntervalTree(N, seed=1)
    for _ in range(60):
        lo = int(rng.integers(0, N))
        hi = int(rng.integers(lo, min(N, lo + 5000)))
        tree.purchase(lo, hi, int(rng.integers(1, 6)))
    oracle = IntervalOracle(tree)
    C0 = 8.0
    exact = solve_cost_compressed(*oracle.compressed(), C0).cost

    hits = 0
    for seed in range(20):
        estimate = approximate_cost(C0, oracle, 0.02, 0.05, make_rng(seed))
        _assert_search_shape(estimate)
        assert estimate.iterations <= 6
        hits += exact / 1.04 <= estimate.c_hat <= exact * 1.04
    assert hits >= 19


def test_nearly_all_max_ledger_stops_at_draw_ceiling() -> None:
    N = 10**9
    tree = IntervalTree(N)
    tree.purchase(0, N - 2, 1)

    class CountingOracle(IntervalOracle):
        def __init__(self, tree):
            super().__init__(tree)
            self.batches: list[int] = []

        def sample_payouts(self, rng, size):
            self.batches.append(size)
            return super().sample_payouts(rng, size)

    oracle = CountingOracle(tree)
    with pytest.raises(SamplingError):
        approximate_cost(2.0, oracle, 0.05, 0.05, make_rng(0), max_draws=2**22)
    assert max(oracle.batches) <= DRAW_CHUNK
    assert sum(oracle.batches) == 2**22


def test_config_carries_draw_ceiling() -> None:
    assert ApproxConfig().max_draws == MAX_DRAWS
    with pytest.raises(DomainError):
        ApproxConfig(max_draws=0)


@pytest.mark.parametrize(("epsilon", "delta"), [(0.05, 0.05), (0.02, 0.1)])
def test_bracket_keeps_exact_cost_every_round(epsilon: float, delta: float) -> None:
    rng = np.random.default_rng(77)
    q = rng.integers(0, 12, size=2**11)
    C0 = 2.5
    exact = solve_cost_exact(q, C0)
    oracle = ExplicitOracle(q)

    held = 0
    seeds = 30
    for seed in range(seeds):
        estimate = approximate_cost(C0, oracle, epsilon, delta, make_rng(seed))
        _assert_search_shape(estimate)
        held += _bracket_holds(estimate, exact)
    assert held >= math.floor((1 - delta) * seeds)


def _ledger_class(index: int) -> tuple[float, ExplicitOracle | IntervalOracle, float]:
    rng = np.random.default_rng(500 + index)
    C0 = float(rng.uniform(0.5, 2.0))
    if index % 2 == 0:
        q = rng.integers(0, int(rng.integers(2, 6)), size=2 ** int(rng.integers(6, 13)))
        return C0, ExplicitOracle(q), solve_cost_exact(q, C0)
    N = 2 ** int(rng.integers(12, 17))
    tree = IntervalTree(N, seed=index)
    for _ in range(int(rng.integers(1, 8))):
        lo = int(rng.integers(0, N))
        tree.purchase(lo, int(rng.integers(lo, N)), 1)
    oracle = IntervalOracle(tree)
    return C0, oracle, solve_cost_compressed(*oracle.compressed(), C0).cost


@pytest.mark.slow
@pytest.mark.parametrize(("epsilon", "delta"), [(0.05, 0.05), (0.02, 0.1)])
@pytest.mark.parametrize("index", range(20))
def test_ledger_classes_land_in_band(index: int, epsilon: float, delta: float) -> None:
    C0, oracle, exact = _ledger_class(index)
    hits = 0
    held = 0
    seeds = 200
    for seed in range(seeds):
        estimate = approximate_cost(C0, oracle, epsilon, delta, make_rng(index, seed))
        _assert_search_shape(estimate)
        hits += exact / estimate.error_factor <= estimate.c_hat <= exact * estimate.error_factor
        held += _bracket_holds(estimate, exact)
    assert hits >= math.floor((1 - delta) * seeds)
    assert held >= math.floor((1 - delta) * seeds)
