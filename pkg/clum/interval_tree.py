"""Augmented balanced search tree over elementary intervals.

Each node owns the elementary interval ``[key, next_key)`` whose outcomes all
hold ``value`` shares. Purchases split the tree at the purchase endpoints,
add lazily to the middle part and merge back ("split-update-merge"), so a
purchase touches O(log k) nodes and the root always carries the maximum
payout and how many outcomes attain it.

Balance comes from random heap priorities (a treap); split and merge are the
primitives. ``next_key`` threads every node to its in-order successor, and
only changes when a new endpoint is inserted, so the per-node recompute
stays O(1).

The outcomes ``[0, first_key)`` before the smallest key are implicit and hold
zero shares until a purchase starting at 0 materialises key 0.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from scipy.special import logsumexp

from .approx import MaxStats
from .errors import DomainError, SingularityError
from .exact import CostSolution

logger = logging.getLogger(__name__)

HEIGHT_FACTOR = 4.0
HEIGHT_SLACK = 4


class IntervalNode:
    __slots__ = (
        "key",
        "value",
        "next_key",
        "priority",
        "left",
        "right",
        "max_val",
        "max_count",
        "lazy_add",
        "height",
    )

    def __init__(self, key: int, value: int, next_key: int, priority: float):
        self.key = key
        self.value = value
        self.next_key = next_key
        self.priority = priority
        self.left: IntervalNode | None = None
        self.right: IntervalNode | None = None
        self.max_val = value
        self.max_count = next_key - key
        self.lazy_add = 0
        self.height = 1

    def __repr__(self) -> str:
        return f"IntervalNode([{self.key}, {self.next_key}) value={self.value} lazy={self.lazy_add})"


@dataclass
class OpCounter:
    touched: int = 0


def push_down(node: IntervalNode | None) -> None:
    """Apply a pending increment to ``node`` and hand it to the children."""
    if node is None or node.lazy_add == 0:
        return
    node.value += node.lazy_add
    node.max_val += node.lazy_add
    if node.left is not None:
        node.left.lazy_add += node.lazy_add
    if node.right is not None:
        node.right.lazy_add += node.lazy_add
    node.lazy_add = 0


def update_augmented_data(node: IntervalNode) -> None:
    """Recompute ``max_val``, ``max_count`` and ``height`` from the children."""
    assert node.lazy_add == 0, "recompute on a node with a pending increment"
    left, right = node.left, node.right
    push_down(left)
    push_down(right)
    mval = node.value
    if left is not None and left.max_val > mval:
        mval = left.max_val
    if right is not None and right.max_val > mval:
        mval = right.max_val
    count = node.next_key - node.key if node.value == mval else 0
    if left is not None and left.max_val == mval:
        count += left.max_count
    if right is not None and right.max_val == mval:
        count += right.max_count
    node.max_val = mval
    node.max_count = count
    node.height = 1 + max(left.height if left else 0, right.height if right else 0)


def split(
    node: IntervalNode | None, key: int, ops: OpCounter | None = None
) -> tuple[IntervalNode | None, IntervalNode | None]:
    """Split into keys ``< key`` and keys ``>= key``."""
    if node is None:
        return None, None
    if ops is not None:
        ops.touched += 1
    push_down(node)
    if node.key < key:
        lower, upper = split(node.right, key, ops)
        node.right = lower
        update_augmented_data(node)
        return node, upper
    lower, upper = split(node.left, key, ops)
    node.left = upper
    update_augmented_data(node)
    return lower, node


def merge(
    left: IntervalNode | None, right: IntervalNode | None, ops: OpCounter | None = None
) -> IntervalNode | None:
    """Join two trees where every key of ``left`` is below every key of ``right``."""
    if left is None:
        return right
    if right is None:
        return left
    if ops is not None:
        ops.touched += 1
    if left.priority > right.priority:
        push_down(left)
        left.right = merge(left.right, right, ops)
        update_augmented_data(left)
        return left
    push_down(right)
    right.left = merge(left, right.left, ops)
    update_augmented_data(right)
    return right


def _retarget_last(node: IntervalNode, key: int, ops: OpCounter) -> tuple[int, int]:
    """Point the largest node at ``key``; return its value and former successor."""
    ops.touched += 1
    push_down(node)
    if node.right is not None:
        found = _retarget_last(node.right, key, ops)
    else:
        found = (node.value, node.next_key)
        node.next_key = key
    update_augmented_data(node)
    return found


def _min_key(node: IntervalNode) -> int:
    while node.left is not None:
        node = node.left
    return node.key


def _flush(node: IntervalNode | None) -> None:
    if node is None:
        return
    push_down(node)
    _flush(node.left)
    _flush(node.right)
    update_augmented_data(node)


def _in_order(node: IntervalNode | None) -> Iterator[IntervalNode]:
    stack: list[IntervalNode] = []
    while stack or node is not None:
        while node is not None:
            stack.append(node)
            node = node.left
        node = stack.pop()
        yield node
        node = node.right


class IntervalTree:
    """Share counts over outcomes ``0..N-1`` for an interval-security market."""

    def __init__(self, N: int, seed: int = 0, debug: bool = False):
        if N < 1:
            raise DomainError(f"universe size must be positive, got {N}")
        self.N = int(N)
        self.root: IntervalNode | None = None
        self.node_count = 0
        self.purchase_count = 0
        self.first_key: int | None = None
        self.ops = OpCounter()
        self.debug = debug
        self._rng = random.Random(seed)

    @property
    def op_count(self) -> int:
        """Nodes touched by split, merge and endpoint insertion so far."""
        return self.ops.touched

    @property
    def height(self) -> int:
        return self.root.height if self.root is not None else 0

    def height_bound(self) -> float:
        return HEIGHT_FACTOR * math.log2(self.node_count + 1) + HEIGHT_SLACK

    def ensure_endpoint_exists(self, key: int) -> bool:
        """Insert ``key`` inheriting its predecessor's value; True if inserted."""
        if key >= self.N:
            return False
        left, right = split(self.root, key, self.ops)
        if right is not None and _min_key(right) == key:
            self.root = merge(left, right, self.ops)
            return False
        if left is not None:
            inherited, successor = _retarget_last(left, key, self.ops)
        else:
            inherited = 0
            successor = _min_key(right) if right is not None else self.N
        node = IntervalNode(key, inherited, successor, self._rng.random())
        self.root = merge(merge(left, node, self.ops), right, self.ops)
        self.node_count += 1
        if self.first_key is None or key < self.first_key:
            self.first_key = key
        return True

    def purchase(self, lo: int, hi: int, val: int) -> None:
        """Add ``val`` shares to every outcome in ``[lo, hi]``."""
        if not 0 <= lo <= hi < self.N:
            raise DomainError(f"interval [{lo}, {hi}] not inside [0, {self.N})")
        if isinstance(val, bool) or int(val) != val or val < 1:
            raise DomainError(f"purchase quantity must be a positive integer, got {val!r}")
        self.ensure_endpoint_exists(lo)
        self.ensure_endpoint_exists(hi + 1)
        left, rest = split(self.root, lo, self.ops)
        middle, right = split(rest, hi + 1, self.ops)
        if middle is not None:
            middle.lazy_add += int(val)
        self.root = merge(merge(left, middle, self.ops), right, self.ops)
        self.purchase_count += 1
        if self.height > self.height_bound():
            logger.debug("height %d above bound %.1f; rebalancing", self.height, self.height_bound())
            self.rebalance()
        if self.debug:
            self.check_invariants()

    def query_max(self) -> MaxStats:
        """``(q_max, s_qmax)`` read off the root in O(1)."""
        if self.root is None:
            return MaxStats(0, self.N)
        best = self.root.max_val + self.root.lazy_add
        count = self.root.max_count
        leading = self.first_key or 0
        if leading:
            if best == 0:
                count += leading
            elif best < 0:
                best, count = 0, leading
        return MaxStats(best, count)

    def value_at(self, index: int) -> int:
        """Shares held by one outcome; O(log k) descent summing pending increments."""
        if not 0 <= index < self.N:
            raise DomainError(f"outcome {index} outside [0, {self.N})")
        node = self.root
        pending = 0
        found = 0
        while node is not None:
            pending += node.lazy_add
            if node.key <= index:
                found = node.value + pending
                node = node.right
            else:
                node = node.left
        return found

    def intervals(self) -> list[tuple[int, int, int]]:
        """Elementary intervals ``(start, end, value)`` covering ``[0, N)`` in order."""
        out: list[tuple[int, int, int]] = []
        if self.first_key is None:
            return [(0, self.N, 0)]
        if self.first_key > 0:
            out.append((0, self.first_key, 0))
        self.flush()
        for node in _in_order(self.root):
            out.append((node.key, node.next_key, node.value))
        return out

    def flush(self) -> None:
        """Push every pending increment to the nodes it belongs to."""
        _flush(self.root)

    def rebalance(self) -> None:
        """Rebuild a perfectly balanced tree over the same elementary intervals."""
        self.flush()
        nodes = list(_in_order(self.root))
        priorities = sorted((self._rng.random() for _ in nodes), reverse=True)

        def build(lo: int, hi: int, depth: int, slots: list[list[IntervalNode]]) -> IntervalNode | None:
            if lo > hi:
                return None
            mid = (lo + hi) // 2
            node = nodes[mid]
            while len(slots) <= depth:
                slots.append([])
            slots[depth].append(node)
            node.left = build(lo, mid - 1, depth + 1, slots)
            node.right = build(mid + 1, hi, depth + 1, slots)
            return node

        levels: list[list[IntervalNode]] = []
        self.root = build(0, len(nodes) - 1, 0, levels)
        ranked = iter(priorities)
        for level in levels:
            for node in level:
                node.priority = next(ranked)
        for level in reversed(levels):
            for node in level:
                update_augmented_data(node)

    def check_invariants(self) -> None:
        """Assert order, heap, threading, augmentation and height invariants."""
        assert self.height <= self.height_bound(), "tree height above bound"
        nodes = list(_in_order(self.root))
        assert len(nodes) == self.node_count, "node count drifted"
        for prev, node in zip(nodes, nodes[1:]):
            assert prev.key < node.key, "keys out of order"
            assert prev.next_key == node.key, "successor thread broken"
        if nodes:
            assert nodes[-1].next_key == self.N, "last interval does not end at N"
            assert nodes[0].key == self.first_key, "first key out of date"

        def walk(node: IntervalNode | None, pending: int) -> tuple[int, int]:
            if node is None:
                return -1, 0
            pending += node.lazy_add
            for child in (node.left, node.right):
                assert child is None or child.priority <= node.priority, "heap order broken"
            lmax, lcount = walk(node.left, pending)
            rmax, rcount = walk(node.right, pending)
            own = node.value + pending
            best = max(own, lmax, rmax)
            count = (node.next_key - node.key if own == best else 0)
            count += (lcount if lmax == best else 0) + (rcount if rmax == best else 0)
            assert node.max_val + pending == best, "max_val stale"
            assert node.max_count == count, "max_count stale"
            return best, count

        walk(self.root, 0)

    def to_snapshot(self) -> dict[str, Any]:
        pairs = [[start, value] for start, _, value in self.intervals() if start != 0 or self.first_key == 0]
        return {"N": self.N, "purchases": self.purchase_count, "intervals": pairs}

    @classmethod
    def from_snapshot(cls, payload: Any, seed: int = 0, debug: bool = False) -> "IntervalTree":
        if not isinstance(payload, dict) or set(payload) - {"N", "purchases", "intervals", "C0"}:
            raise DomainError("interval snapshot must be an object with N, purchases, intervals")
        try:
            tree = cls(int(payload["N"]), seed=seed, debug=debug)
            pairs = [(int(k), int(v)) for k, v in payload.get("intervals", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed interval snapshot: {exc}") from exc
        keys = [k for k, _ in pairs]
        if keys != sorted(set(keys)) or (keys and (keys[0] < 0 or keys[-1] >= tree.N)):
            raise DomainError("snapshot keys must be distinct, sorted and inside [0, N)")
        if any(v < 0 for _, v in pairs):
            raise DomainError("snapshot values must be nonnegative")
        for index, (key, value) in enumerate(pairs):
            successor = pairs[index + 1][0] if index + 1 < len(pairs) else tree.N
            node = IntervalNode(key, value, successor, tree._rng.random())
            tree.root = merge(tree.root, node, tree.ops)
        tree.node_count = len(pairs)
        tree.first_key = keys[0] if keys else None
        tree.purchase_count = int(payload.get("purchases", 0))
        if tree.height > tree.height_bound():
            tree.rebalance()
        return tree

    def save(self, path: Path, C0: float | None = None) -> None:
        payload = self.to_snapshot()
        if C0 is not None:
            payload["C0"] = C0
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path, seed: int = 0) -> tuple["IntervalTree", float | None]:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DomainError(f"cannot read interval state {path}: {exc}") from exc
        except ValueError as exc:
            raise DomainError(f"interval state {path} is not valid JSON: {exc}") from exc
        C0 = payload.get("C0") if isinstance(payload, dict) else None
        return cls.from_snapshot(payload, seed=seed), (float(C0) if C0 is not None else None)


class IntervalOracle:
    """Max statistics and uniform sampling over a frozen view of the tree."""

    def __init__(self, tree: IntervalTree):
        self.tree = tree
        self.N = tree.N
        segments = tree.intervals()
        self.starts = np.array([s for s, _, _ in segments], dtype=np.int64)
        self.lengths = np.array([e - s for s, e, _ in segments], dtype=np.int64)
        self.values = np.array([v for _, _, v in segments], dtype=np.int64)
        self._stats = tree.query_max()

    def max_stats(self) -> MaxStats:
        return self._stats

    def sample_outcome(self, rng: np.random.Generator) -> tuple[int, int]:
        index = int(rng.integers(0, self.N))
        return index, self.tree.value_at(index)

    def sample_payouts(self, rng: np.random.Generator, size: int) -> np.ndarray:
        indices = rng.integers(0, self.N, size=size)
        return self.values[np.searchsorted(self.starts, indices, side="right") - 1]

    def compressed(self) -> tuple[np.ndarray, np.ndarray]:
        """``(values, lengths)`` for exact solving over elementary intervals."""
        return self.values, self.lengths


def interval_security_price(
    tree: IntervalTree, cost: float | CostSolution, lo: int, hi: int
) -> float:
    """Price of the interval security ``[lo, hi]`` in O(k).

    ``cost`` is either a plain cost ``C`` or a solved ``CostSolution``, whose
    log-offset stays exact when ``C`` rounds onto ``q_max``.
    """
    if not 0 <= lo <= hi < tree.N:
        raise DomainError(f"interval [{lo}, {hi}] not inside [0, {tree.N})")
    rows = np.array(tree.intervals(), dtype=np.float64)
    starts, ends, values = rows[:, 0], rows[:, 1], rows[:, 2]
    if isinstance(cost, CostSolution):
        with np.errstate(divide="ignore"):
            log_gaps = np.log(cost.q_max - values)
        distances = np.logaddexp(cost.log_offset, log_gaps)
    else:
        q_max = tree.query_max().q_max
        if not cost > q_max:
            raise SingularityError(f"cost {cost} must exceed the maximum payout {q_max}")
        distances = np.log(cost - values)
    overlap = np.clip(np.minimum(ends, hi + 1) - np.maximum(starts, lo), 0, None)
    inside = overlap > 0
    if not inside.any():
        return 0.0
    log_total = logsumexp(-distances, b=ends - starts)
    return float(np.exp(logsumexp(-distances[inside], b=overlap[inside]) - log_total))


def interval_purchase(tree: IntervalTree, l: int, r: int, val: int) -> None:
    tree.purchase(l, r, val)


def query_max(tree: IntervalTree) -> MaxStats:
    return tree.query_max()


def value_at(tree: IntervalTree, index: int) -> int:
    return tree.value_at(index)


def ensure_endpoint_exists(tree: IntervalTree, key: int) -> bool:
    return tree.ensure_endpoint_exists(key)


def rebalance(tree: IntervalTree) -> None:
    tree.rebalance()


def copy_tree(tree: IntervalTree, seed: int = 0) -> IntervalTree:
    """Independent tree over the same elementary intervals."""
    return IntervalTree.from_snapshot(tree.to_snapshot(), seed=seed, debug=tree.debug)
