import math

import numpy as np
import pytest

from clum.errors import CapacityError, DomainError
from clum.exact import solution_security_price, solve_exact
from clum.market import Clause2, MarketState, materialize_shares
from clum.rng import make_rng
from clum.wish import (
    ALPHA_STAR,
    EnumerationKMapOracle,
    ParityHash,
    WishConfig,
    bound_factor,
    clause_weights,
    k_map_constrained,
    level_weights,
    price_band,
    wish_bounds,
    wish_estimate,
    wish_price,
    wish_price_report,
)

DESK = WishConfig(delta=0.1, alpha=0.5)


def _random_state(rng: np.random.Generator, n: int) -> MarketState:
    # a large subsidy keeps the weights spread out across outcomes
    state = MarketState.boolean(float(rng.uniform(50.0, 100.0)), n)
    for _ in range(int(rng.integers(3, 12))):
        a, b = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        signs = rng.choice([-1, 1], size=2)
        state.buy(Clause2.from_ints(int(signs[0] * a), int(signs[1] * b)), int(rng.integers(1, 8)))
    return state


def _bits(n: int) -> np.ndarray:
    outcomes = np.arange(2**n, dtype=np.int64)
    return ((outcomes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def test_parity_hash_sampling_shapes() -> None:
    parity = ParityHash.sample(3, 6, make_rng(0))
    assert parity.A.shape == (3, 6)
    assert parity.b.shape == (3,)
    assert set(np.unique(parity.A)) <= {0, 1}
    assert ParityHash.sample(0, 6, make_rng(0)).feasible(_bits(6)).all()
    with pytest.raises(DomainError):
        ParityHash.sample(7, 6, make_rng(0))


def test_k_map_without_constraints_uniform_weights() -> None:
    n = 4
    side = Clause2.from_ints(1, 2).mask(np.arange(2**n))
    parity = ParityHash.sample(0, n, make_rng(0))
    assert k_map_constrained(np.ones(2**n), parity, side, 12) == 1.0
    assert k_map_constrained(np.ones(2**n), parity, side, 13) == 0.0


def test_k_map_singleton_feasible_set() -> None:
    n = 3
    weights = np.arange(1, 9, dtype=np.float64)
    # x1 = 1, x2 = 0, x3 = 1 pins outcome 0b101
    parity = ParityHash(np.eye(3, dtype=np.uint8), np.array([1, 0, 1], dtype=np.uint8))
    side = np.ones(8, dtype=bool)
    assert k_map_constrained(weights, parity, side, 1) == weights[0b101]
    assert k_map_constrained(weights, parity, side, 2) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_k_map_matches_sorted_enumeration(seed: int) -> None:
    n = 8
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.01, 1.0, size=2**n)
    side = rng.random(2**n) < 0.6
    oracle = EnumerationKMapOracle(weights, n)
    bits = _bits(n)
    for rows in range(n + 1):
        parity = ParityHash.sample(rows, n, make_rng(seed, rows))
        feasible = [
            weights[j]
            for j in range(2**n)
            if side[j] and all(int(bits[j] @ parity.A[r]) % 2 == parity.b[r] for r in range(rows))
        ]
        feasible.sort(reverse=True)
        for k in (1, 3, 12):
            expected = feasible[k - 1] if len(feasible) >= k else 0.0
            assert oracle.k_largest(parity, side, k) == expected


def test_enumeration_bound() -> None:
    with pytest.raises(CapacityError):
        EnumerationKMapOracle(np.ones(2), 21, max_events=20)
    with pytest.raises(DomainError):
        EnumerationKMapOracle(np.ones(8), 4)
    with pytest.raises(DomainError):
        EnumerationKMapOracle(np.zeros(4), 2)


def test_config_rounds_and_validation() -> None:
    cfg = WishConfig(delta=0.05)
    assert cfg.alpha == ALPHA_STAR
    assert cfg.k == 12 and cfg.c == 2
    assert cfg.rounds(10) == math.ceil(math.log(10 / 0.05) / ALPHA_STAR)
    assert not cfg.weakened
    assert WishConfig(alpha=0.5).weakened
    with pytest.raises(DomainError):
        WishConfig(c=1)
    with pytest.raises(DomainError):
        WishConfig(delta=1.0)
    with pytest.raises(DomainError):
        WishConfig(alpha=0.0)


def test_degenerate_sides_skip_sampling() -> None:
    weights = np.ones(16)
    assert wish_estimate(weights, np.ones(16, dtype=bool), 4, DESK, 0).price == 1.0
    assert wish_estimate(weights, np.zeros(16, dtype=bool), 4, DESK, 0).price == 0.0


def test_query_count_and_medians() -> None:
    n = 6
    rng = np.random.default_rng(3)
    weights = rng.uniform(0.1, 1.0, size=2**n)
    side = Clause2.from_ints(1, -2).mask(np.arange(2**n))
    oracle = EnumerationKMapOracle(weights, n)
    estimate = wish_estimate(weights, side, n, DESK, seed=11, oracle=oracle)

    T = DESK.rounds(n)
    assert estimate.rounds == T
    assert estimate.hash_draws == (n + 1) * T
    assert oracle.calls == estimate.queries == 2 * (n + 1) * T
    assert len(estimate.medians) == n + 1
    assert estimate.total == pytest.approx(
        estimate.medians[0] + sum(estimate.medians[i + 1] * 2**i for i in range(n))
    )
    assert 0.0 < estimate.price < 1.0


def test_same_seed_same_estimate() -> None:
    state = _random_state(np.random.default_rng(5), 7)
    clause = Clause2.from_ints(2, 5)
    first = wish_price_report(state, clause, DESK, seed=9)
    second = wish_price_report(state, clause, DESK, seed=9)
    assert first.as_dict() == second.as_dict()


def test_uniform_market_clause_price_in_band() -> None:
    state = MarketState.boolean(1.0, 8)
    price = wish_price(state, Clause2.from_ints(1, 2), DESK, seed=0)
    assert 0.75 / 64 <= price <= min(1.0, 0.75 * 64)


@pytest.mark.parametrize("n", [8, 9, 10])
def test_random_ledgers_within_factor_64(n: int) -> None:
    rng = np.random.default_rng(n)
    cfg = WishConfig(delta=0.1, alpha=1.0)
    hits = 0
    trials = 12
    for seed in range(trials):
        state = _random_state(rng, n)
        clause = Clause2.from_ints(1, -3)
        q = materialize_shares(state)
        truth = solution_security_price(q, solve_exact(q, state.C0), clause)
        price = wish_price(state, clause, cfg, seed)
        hits += truth / 64 <= price <= truth * 64
    assert hits >= math.floor((1 - cfg.delta) * trials)


@pytest.mark.slow
@pytest.mark.parametrize("n", [8, 9, 10])
def test_hundred_ledgers_within_factor_64(n: int) -> None:
    rng = np.random.default_rng(1000 + n)
    cfg = WishConfig(delta=0.1, alpha=1.0)
    hits = 0
    trials = 100
    for seed in range(trials):
        state = _random_state(rng, n)
        clause = Clause2.from_ints(int(rng.integers(1, n // 2 + 1)), -int(rng.integers(n // 2 + 1, n + 1)))
        q = materialize_shares(state)
        solution = solve_exact(q, state.C0)
        truth = solution_security_price(q, solution, clause)
        price = wish_price(state, clause, cfg, seed)
        hits += truth / 64 <= price <= truth * 64

        weights = clause_weights(state)
        complement = wish_bounds(weights, ~clause.mask(np.arange(2**n)), n, cfg.c, complement=True)
        assert complement.upper <= 2 ** (cfg.c + 1) * complement.lower * (1 + 1e-12)
    assert hits >= math.floor((1 - cfg.delta) * trials)


def test_clause_weights_are_reciprocal_distances() -> None:
    state = _random_state(np.random.default_rng(1), 5)
    q = materialize_shares(state)
    C = solve_exact(q, state.C0).cost
    assert clause_weights(state) == pytest.approx(1.0 / (C - q), rel=1e-9)
    with pytest.raises(DomainError):
        clause_weights(MarketState(C0=1.0, N=8))


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("c", [2, 3])
def test_bounds_sandwich(seed: int, c: int) -> None:
    n = 8
    rng = np.random.default_rng(seed)
    weights = rng.lognormal(sigma=2.0, size=2**n)
    side = Clause2.from_ints(int(rng.integers(1, 5)), -int(rng.integers(5, 9))).mask(np.arange(2**n))
    for mask, complement in ((side, False), (~side, True)):
        bounds = wish_bounds(weights, mask, n, c, complement)
        assert bounds.lower <= bounds.upper
        assert bounds.upper <= bound_factor(c, complement) * bounds.lower * (1 + 1e-12)


def test_clause_side_ratio_can_exceed_complement_factor() -> None:
    n, c = 8, 2
    # rank r carries weight 1/r, so b_i = 2**-i
    weights = 1.0 / np.arange(1, 2**n + 1, dtype=np.float64)
    everything = np.ones(2**n, dtype=bool)
    assert level_weights(weights, everything, n).tolist() == [2.0**-i for i in range(n + 1)]
    clause = wish_bounds(weights, everything, n, c)
    assert clause.lower == pytest.approx(3.25)
    assert clause.upper == pytest.approx(28.0)
    assert 2 ** (c + 1) < clause.ratio <= bound_factor(c, complement=False)
    complement = wish_bounds(weights, everything, n, c, complement=True)
    assert complement.ratio <= bound_factor(c, complement=True)


@pytest.mark.parametrize("seed", range(10))
def test_exact_side_totals_sit_in_price_band(seed: int) -> None:
    n = 8
    rng = np.random.default_rng(seed)
    weights = rng.lognormal(sigma=1.5, size=2**n)
    side = Clause2.from_ints(1, -3).mask(np.arange(2**n))
    clause = wish_bounds(weights, side, n)
    complement = wish_bounds(weights, ~side, n, complement=True)
    assert clause.lower <= weights[side].sum() <= clause.upper
    assert complement.lower <= weights[~side].sum() <= complement.upper
    low, high = price_band(clause, complement)
    assert low <= weights[side].sum() / weights.sum() <= high


def test_map_medians_fall_inside_side_bounds() -> None:
    n = 8
    cfg = WishConfig(delta=0.1, alpha=0.025, k=1)
    side = Clause2.from_ints(1, -3).mask(np.arange(2**n))
    contained = 0
    seeds = range(10)
    for seed in seeds:
        weights = np.random.default_rng(seed).lognormal(sigma=1.0, size=2**n)
        estimate = wish_estimate(weights, side, n, cfg, seed)
        clause = wish_bounds(weights, side, n, cfg.c)
        complement = wish_bounds(weights, ~side, n, cfg.c, complement=True)
        inside = clause.lower <= estimate.total <= clause.upper
        inside_complement = complement.lower <= estimate.total_complement <= complement.upper
        if inside and inside_complement:
            contained += 1
            low, high = price_band(clause, complement)
            assert low * (1 - 1e-12) <= estimate.price <= high * (1 + 1e-12)
    assert contained >= 7


def test_side_smaller_than_k_is_rejected() -> None:
    n = 4
    weights = np.ones(2**n)
    # x1 or x2 leaves four outcomes on the complement
    side = Clause2.from_ints(1, 2).mask(np.arange(2**n))
    with pytest.raises(CapacityError, match="k=12"):
        wish_estimate(weights, side, n, DESK, seed=0)
    assert 0.0 < wish_estimate(weights, side, n, WishConfig(delta=0.1, alpha=0.5, k=4), seed=0).price < 1.0
    with pytest.raises(CapacityError):
        wish_price_report(MarketState.boolean(1.0, n), Clause2.from_ints(1, 2), DESK, seed=0)


def test_level_weights_pick_powers_of_two() -> None:
    weights = np.arange(16, dtype=np.float64) + 1
    levels = level_weights(weights, np.ones(16, dtype=bool), 4)
    assert levels.tolist() == [16.0, 15.0, 13.0, 9.0, 1.0]
    short = level_weights(weights, weights > 12, 4)
    assert short.tolist() == [16.0, 15.0, 13.0, 0.0, 0.0]
