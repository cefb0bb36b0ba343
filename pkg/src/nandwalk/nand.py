"""
Classical NAND-tree semantics.

Instances hold ``2**depth`` leaf bits in left-to-right order. Internal nodes
use heap indexing (root = 1, children of ``i`` are ``2i`` and ``2i + 1``), so
the subtree of a node always covers a contiguous slice of the bits.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._config import CLASSICAL_DEPTH_CAP
from .exceptions import CapExceededError


@dataclass(frozen=True, eq=False)
class NandInstance:
    """A balanced NAND tree of the given depth with its leaf inputs.

    Parameters
    ----------
    depth : int
        Tree depth ``n``; the tree has ``N = 2**n`` leaves.
    bits : sequence of {0, 1}
        Leaf values ``x_1 .. x_N`` in left-to-right order.
    max_depth : int, optional
        Depth cap enforced at construction.
    """

    depth: int
    bits: np.ndarray
    max_depth: int = CLASSICAL_DEPTH_CAP

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 0:
            raise ValueError(f"depth must be a non-negative integer, got {self.depth!r}")
        if self.depth > self.max_depth:
            raise CapExceededError(f"depth {self.depth} exceeds cap {self.max_depth}")
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size != 2**self.depth:
            raise ValueError(
                f"expected {2**self.depth} bits for depth {self.depth}, got shape {bits.shape}"
            )
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("bits must be 0 or 1")
        bits = bits.astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "bits", bits)

    @property
    def n_leaves(self) -> int:
        return 2**self.depth

    @classmethod
    def from_string(cls, bits: str, depth: int | None = None, **kwargs) -> "NandInstance":
        """Build an instance from a string of ``0``/``1`` characters."""
        bits = bits.strip()
        if any(c not in "01" for c in bits):
            raise ValueError(f"bit string may only contain 0 and 1: {bits!r}")
        if depth is None:
            depth = max(len(bits) - 1, 0).bit_length()
        return cls(depth, np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"), **kwargs)

    def bit_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __eq__(self, other):
        if not isinstance(other, NandInstance):
            return NotImplemented
        return self.depth == other.depth and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.depth, self.bits.tobytes()))

    def __repr__(self):
        shown = self.bit_string()
        if len(shown) > 32:
            shown = shown[:29] + "..."
        return f"NandInstance(depth={self.depth}, bits='{shown}')"

    def to_json(self) -> dict:
        return {"depth": self.depth, "bits": self.bit_string()}

    @classmethod
    def from_json(cls, obj: dict, **kwargs) -> "NandInstance":
        if not isinstance(obj, dict) or set(obj) != {"depth", "bits"}:
            raise ValueError('instance JSON must be an object with keys "depth" and "bits"')
        if not isinstance(obj["bits"], str):
            raise ValueError('"bits" must be a string of 0/1 characters')
        return cls.from_string(obj["bits"], depth=int(obj["depth"]), **kwargs)


def load_instance(path, **kwargs) -> NandInstance:
    with open(path) as fh:
        return NandInstance.from_json(json.load(fh), **kwargs)


def save_instance(instance: NandInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_json()) + "\n")


def eval_exact(instance: NandInstance) -> int:
    """Evaluate the root by reading every leaf, one tree level at a time."""
    level = instance.bits.astype(bool)
    while level.size > 1:
        level = ~(level[0::2] & level[1::2])
    return int(level[0])


def eval_randomized_pruning(instance: NandInstance, seed=None) -> tuple[int, int]:
    """Short-circuit evaluation with a random child order at every node.

    A node whose first-evaluated child is 0 returns 1 without reading the
    sibling subtree.

    Returns
    -------
    value : int
        The root value; always equal to ``eval_exact(instance)``.
    queries : int
        Number of leaves read.
    """
    rng = random.Random(seed)
    bits = instance.bits
    reads = 0

    def visit(lo, size):
        nonlocal reads
        if size == 1:
            reads += 1
            return int(bits[lo])
        half = size // 2
        first, second = (lo, lo + half) if rng.getrandbits(1) else (lo + half, lo)
        if visit(first, half) == 0:
            return 1
        return 1 - visit(second, half)

    value = visit(0, instance.n_leaves)
    return value, reads


def worst_case_expected_queries(depth: int, cap: int = 4096) -> tuple[Fraction, Fraction]:
    """Adversarial expected leaf reads of the randomized pruning evaluator.

    Returns ``(W0, W1)``: the maximum, over inputs whose root evaluates to 0
    (resp. 1), of the expected number of leaves read. Values are exact
    rationals.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth > cap:
        raise CapExceededError(f"depth {depth} exceeds cap {cap}")
    w0, w1 = Fraction(1), Fraction(1)
    for _ in range(depth):
        w0, w1 = _dp_step(w0, w1)
    return w0, w1


def _dp_step(w0, w1):
    half = Fraction(1, 2)

    def pair_cost(a, b):
        # a, b: child values; each order has probability 1/2
        cost = Fraction(0)
        for first, second in ((a, b), (b, a)):
            c = w1 if first else w0
            if first == 1:
                c += w1 if second else w0
            cost += half * c
        return cost

    # root 0 <=> both children 1; root 1 <=> at least one child 0
    new_w0 = pair_cost(1, 1)
    new_w1 = max(pair_cost(0, 0), pair_cost(0, 1), pair_cost(1, 0))
    return new_w0, new_w1


def worst_case_table(depths: Sequence[int]) -> list[tuple[int, Fraction, Fraction]]:
    rows = []
    w0, w1 = Fraction(1), Fraction(1)
    for d in range(max(depths) + 1):
        if d > 0:
            w0, w1 = _dp_step(w0, w1)
        if d in depths:
            rows.append((d, w0, w1))
    return rows


def growth_exponent(depth: int) -> float:
    """``log2`` of the one-level growth ratio of ``max(W0, W1)`` at ``depth``."""
    a = max(worst_case_expected_queries(depth))
    b = max(worst_case_expected_queries(depth + 1))
    return float(np.log2(float(b / a)))


def hard_instance(depth: int, root_value: int, seed=None) -> NandInstance:
    """An input attaining the adversarial expectation for ``root_value``.

    Nodes of value 0 get two children of value 1; nodes of value 1 get one
    child of each value, placed in random order.
    """
    if root_value not in (0, 1):
        raise ValueError("root_value must be 0 or 1")
    rng = random.Random(seed)
    values = [root_value]
    for _ in range(depth):
        nxt = []
        for v in values:
            if v == 0:
                nxt += [1, 1]
            elif rng.getrandbits(1):
                nxt += [0, 1]
            else:
                nxt += [1, 0]
        values = nxt
    return NandInstance(depth, np.array(values, dtype=np.uint8))
