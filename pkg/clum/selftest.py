"""Embedded invariant checks run by ``clum selftest``.

Each step raises on failure; ``run_selftest`` keeps going and reports every
step, the same way the release verification script walks its checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .approx import ExplicitOracle, approximate_cost, round_budget
from .exact import solution_prices, solve_exact
from .interval_tree import IntervalTree
from .market import PRICE_TOLERANCE, Clause2, MarketState, materialize_shares
from .reduction import reduce_and_price
from .rng import make_rng
from .twosat import TwoSatFormula, count_models_brute_force
from .wish import bound_factor, wish_bounds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepResult:
    name: str
    ok: bool
    detail: str

    def as_dict(self) -> dict[str, object]:
        return {"name": self.name, "ok": self.ok, "detail": self.detail}


def random_formula(rng: np.random.Generator, n: int, k: int) -> TwoSatFormula:
    clauses = []
    for _ in range(k):
        a, b = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        sign_a, sign_b = rng.choice([-1, 1], size=2)
        clauses.append(Clause2.from_ints(int(sign_a * a), int(sign_b * b)))
    return TwoSatFormula(n, tuple(clauses))


def check_exact_residual(rng: np.random.Generator) -> str:
    for _ in range(25):
        N = int(rng.integers(1, 4096))
        q = rng.integers(0, 10**6, size=N)
        C0 = float(rng.uniform(0.5, 20.0)) * 10**6
        solution = solve_exact(q, C0)
        residual = float(np.mean(np.log(solution.cost - q)) - math.log(C0))
        assert abs(residual) <= 1e-10, f"residual {residual:.3e}"
        q_max = int(q.max())
        assert max(C0, q_max) * (1 - 1e-12) <= solution.cost <= (q_max + C0) * (1 + 1e-12)
    return "25 random ledgers"


def check_prices_normalised(rng: np.random.Generator) -> str:
    for _ in range(25):
        state = MarketState.boolean(float(rng.uniform(0.5, 5.0)), 6)
        for _ in range(5):
            clause = random_formula(rng, 6, 1).clauses[0]
            state.buy(clause, int(rng.integers(1, 20)))
        q = materialize_shares(state)
        prices = solution_prices(q, solve_exact(q, state.C0))
        assert abs(prices.sum() - 1.0) <= PRICE_TOLERANCE, f"prices sum to {prices.sum()!r}"
        assert np.all(prices > 0)
    return "25 Boolean markets"


def check_reduction(rng: np.random.Generator) -> str:
    for _ in range(20):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, min(2**n, 3 * n)))
        formula = random_formula(rng, n, k)
        report = reduce_and_price(formula)
        expected = count_models_brute_force(formula)
        assert report.count == expected, f"{report.count} != {expected} for n={n} k={k}"
    return "20 random formulas"


def check_approx(rng: np.random.Generator) -> str:
    epsilon, delta = 0.05, 0.05
    q = rng.integers(0, 50, size=4096)
    exact = solve_exact(q, 3.0).cost
    estimate = approximate_cost(3.0, ExplicitOracle(q), epsilon, delta, rng)
    assert estimate.iterations <= round_budget(epsilon)
    if estimate.trace:
        first = estimate.trace[0]
        assert first.b / first.a <= 2.0
    factor = estimate.error_factor
    assert exact / factor <= estimate.c_hat <= exact * factor, f"{estimate.c_hat} vs {exact}"
    return f"{estimate.iterations} rounds"


def check_interval_tree(rng: np.random.Generator) -> str:
    N = 2000
    tree = IntervalTree(N, seed=int(rng.integers(0, 2**31)), debug=True)
    mirror = np.zeros(N, dtype=np.int64)
    for _ in range(200):
        lo = int(rng.integers(0, N))
        hi = int(rng.integers(lo, N))
        val = int(rng.integers(1, 10))
        tree.purchase(lo, hi, val)
        mirror[lo : hi + 1] += val
        stats = tree.query_max()
        assert stats.q_max == mirror.max()
        assert stats.s_qmax == int(np.count_nonzero(mirror == mirror.max()))
    for index in rng.integers(0, N, size=200):
        assert tree.value_at(int(index)) == mirror[index]
    assert tree.node_count <= 2 * tree.purchase_count
    return f"k={tree.node_count} height={tree.height}"


def check_wish_bounds(rng: np.random.Generator) -> str:
    n, c = 8, 2
    weights = rng.uniform(0.01, 1.0, size=2**n)
    side = random_formula(rng, n, 1).clauses[0].mask(np.arange(2**n, dtype=np.int64))
    for mask, complement in ((side, False), (~side, True)):
        bounds = wish_bounds(weights, mask, n, c, complement)
        assert bounds.upper <= bound_factor(c, complement) * bounds.lower * (1 + 1e-12)
    return "both sides"


STEPS: list[tuple[str, Callable[[np.random.Generator], str]]] = [
    ("exact_residual", check_exact_residual),
    ("prices_normalised", check_prices_normalised),
    ("reduction_counts", check_reduction),
    ("approx_band", check_approx),
    ("interval_tree_mirror", check_interval_tree),
    ("wish_bounds", check_wish_bounds),
]


def run_selftest(seed: int = 0) -> list[StepResult]:
    results = []
    for index, (name, step) in enumerate(STEPS):
        logger.info("selftest %s...", name)
        try:
            detail = step(make_rng(seed, index))
            results.append(StepResult(name, True, detail))
        except Exception as exc:
            logger.error("selftest %s failed: %s", name, exc)
            results.append(StepResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
