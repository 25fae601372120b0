"""2-SAT formulas: DIMACS input, implication-graph solving and model counting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, DomainError
from .market import Clause2, EventLiteral

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_EVENTS = 24
_CHUNK_BITS = 20


@dataclass(frozen=True)
class TwoSatFormula:
    n: int
    clauses: tuple[Clause2, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"a formula needs at least one event, got n={self.n}")
        object.__setattr__(self, "clauses", tuple(self.clauses))
        for clause in self.clauses:
            clause.validate(2**self.n, self.n)

    @property
    def k(self) -> int:
        return len(self.clauses)

    def satisfied_by(self, outcome: int) -> bool:
        return all(clause.holds(outcome) for clause in self.clauses)


def parse_dimacs(text: str) -> TwoSatFormula:
    """Parse 2-CNF DIMACS: ``p cnf n k`` then ``a b 0`` clause lines."""
    n: int | None = None
    declared = 0
    pending: list[int] = []
    clauses: list[Clause2] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DomainError(f"line {lineno}: malformed problem line {line!r}")
            try:
                n, declared = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise DomainError(f"line {lineno}: malformed problem line {line!r}") from exc
            continue
        if n is None:
            raise DomainError(f"line {lineno}: clause before the problem line")
        try:
            tokens = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise DomainError(f"line {lineno}: non-integer literal in {line!r}") from exc
        for tok in tokens:
            if tok != 0:
                if abs(tok) > n:
                    raise DomainError(f"line {lineno}: variable {abs(tok)} exceeds n={n}")
                pending.append(tok)
                continue
            if len(pending) != 2:
                raise DomainError(f"line {lineno}: clause {pending} is not 2-literal")
            clauses.append(Clause2.from_ints(*pending))
            pending = []
    if n is None:
        raise DomainError("missing 'p cnf' problem line")
    if pending:
        raise DomainError(f"unterminated clause {pending}")
    if declared != len(clauses):
        logger.warning("problem line declares %d clauses, found %d", declared, len(clauses))
    return TwoSatFormula(n, tuple(clauses))


def load_dimacs(path: Path) -> TwoSatFormula:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    return parse_dimacs(text)


def _node(lit: EventLiteral) -> int:
    return 2 * (lit.event - 1) + (0 if lit.positive else 1)


def _strong_components(adjacency: list[list[int]]) -> list[int]:
    """Tarjan's algorithm, iterative; component ids come in reverse topological order."""
    size = len(adjacency)
    index = [-1] * size
    low = [0] * size
    on_stack = [False] * size
    component = [-1] * size
    stack: list[int] = []
    counter = 0
    found = 0

    for root in range(size):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            node, edge = work.pop()
            if edge == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            recurse = False
            edges = adjacency[node]
            while edge < len(edges):
                nxt = edges[edge]
                edge += 1
                if index[nxt] == -1:
                    work.append((node, edge))
                    work.append((nxt, 0))
                    recurse = True
                    break
                if on_stack[nxt]:
                    low[node] = min(low[node], index[nxt])
            if recurse:
                continue
            if low[node] == index[node]:
                while True:
                    member = stack.pop()
                    on_stack[member] = False
                    component[member] = found
                    if member == node:
                        break
                found += 1
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return component


def two_sat_find_assignment(formula: TwoSatFormula) -> int | None:
    """A satisfying outcome index (bit ``e-1`` = event ``e``), or ``None`` if unsat."""
    adjacency: list[list[int]] = [[] for _ in range(2 * formula.n)]
    for clause in formula.clauses:
        a, b = _node(clause.first), _node(clause.second)
        # (a or b) == (not a -> b) and (not b -> a)
        adjacency[a ^ 1].append(b)
        adjacency[b ^ 1].append(a)

    component = _strong_components(adjacency)
    outcome = 0
    for event in range(formula.n):
        pos, neg = component[2 * event], component[2 * event + 1]
        if pos == neg:
            return None
        if pos < neg:
            outcome |= 1 << event
    return outcome


def satisfying_mask(formula: TwoSatFormula, outcomes: np.ndarray) -> np.ndarray:
    mask = np.ones(outcomes.shape, dtype=bool)
    for clause in formula.clauses:
        mask &= clause.mask(outcomes)
    return mask


def count_models_brute_force(
    formula: TwoSatFormula, max_events: int = BRUTE_FORCE_MAX_EVENTS
) -> int:
    """Exact model count by enumerating all ``2**n`` assignments."""
    if formula.n > max_events:
        raise CapacityError(f"n={formula.n} exceeds the enumeration bound {max_events}")
    total = 0
    chunk = 1 << min(formula.n, _CHUNK_BITS)
    for start in range(0, 2**formula.n, chunk):
        outcomes = np.arange(start, start + chunk, dtype=np.int64)
        total += int(np.count_nonzero(satisfying_mask(formula, outcomes)))
    return total
