import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nandwalk.exceptions import CapExceededError
from nandwalk.nand import (
    NandInstance,
    eval_exact,
    eval_randomized_pruning,
    growth_exponent,
    hard_instance,
    load_instance,
    save_instance,
    worst_case_expected_queries,
)


def truth_table(bits):
    """Direct recursive definition, independent of the level-by-level code."""
    if len(bits) == 1:
        return bits[0]
    half = len(bits) // 2
    return int(not (truth_table(bits[:half]) and truth_table(bits[half:])))


def all_inputs(depth):
    return [list(b) for b in itertools.product((0, 1), repeat=2**depth)]


def pruning_outcomes(bits):
    """Every (value, reads) outcome with its probability, by enumerating all
    child orders; an independent re-derivation of the pruning evaluator."""
    if len(bits) == 1:
        return {(bits[0], 1): Fraction(1)}
    half = len(bits) // 2
    left, right = pruning_outcomes(bits[:half]), pruning_outcomes(bits[half:])
    out = {}
    for first, second in ((left, right), (right, left)):
        for (v1, q1), p1 in first.items():
            if v1 == 0:
                key = (1, q1)
                out[key] = out.get(key, 0) + p1 / 2
                continue
            for (v2, q2), p2 in second.items():
                key = (1 - v2, q1 + q2)
                out[key] = out.get(key, 0) + p1 * p2 / 2
    return out


@pytest.mark.parametrize(
    "depth, bits, expected",
    [(0, [1], 1), (0, [0], 0), (1, [1, 1], 0), (1, [0, 1], 1), (2, [1, 1, 0, 1], 1)],
)
def test_eval_exact_examples(depth, bits, expected):
    assert eval_exact(NandInstance(depth, bits)) == expected


@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_eval_exact_matches_truth_table(depth):
    for bits in all_inputs(depth):
        assert eval_exact(NandInstance(depth, bits)) == truth_table(bits)


def test_instance_validation():
    with pytest.raises(ValueError):
        NandInstance(2, [1, 0, 1])
    with pytest.raises(ValueError):
        NandInstance(1, [1, 2])
    with pytest.raises(CapExceededError):
        NandInstance(3, [0] * 8, max_depth=2)
    inst = NandInstance(2, [1, 0, 1, 1])
    with pytest.raises(ValueError):
        inst.bits[0] = 0


def test_instance_json_round_trip(tmp_path):
    inst = NandInstance.from_string("10110010")
    assert inst.depth == 3
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    assert json.loads(path.read_text()) == {"depth": 3, "bits": "10110010"}
    assert load_instance(path) == inst
    with pytest.raises(ValueError):
        NandInstance.from_json({"depth": 1, "bits": [0, 1]})


def test_pruning_examples():
    for seed in range(10):
        assert eval_randomized_pruning(NandInstance(1, [0, 0]), seed) == (1, 1)
        assert eval_randomized_pruning(NandInstance(1, [1, 1]), seed) == (0, 2)


def test_pruning_all_ones_depth_two():
    # both root children evaluate to 0, so the first one short-circuits the root
    outcomes = pruning_outcomes([1, 1, 1, 1])
    assert outcomes == {(1, 2): 1}
    reads = {eval_randomized_pruning(NandInstance(2, [1, 1, 1, 1]), s)[1] for s in range(50)}
    assert reads == {2}


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_pruning_matches_enumerated_distribution(depth):
    for bits in all_inputs(depth)[:: max(1, 2 ** (2**depth) // 64)]:
        exact_mean = sum(p * q for (_, q), p in pruning_outcomes(bits).items())
        inst = NandInstance(depth, bits)
        reads = [eval_randomized_pruning(inst, s)[1] for s in range(3000)]
        assert np.mean(reads) == pytest.approx(float(exact_mean), rel=0.05)


@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_pruning_value_always_exact(depth):
    for bits in all_inputs(depth):
        inst = NandInstance(depth, bits)
        expected = eval_exact(inst)
        for seed in range(4):
            value, reads = eval_randomized_pruning(inst, seed)
            assert value == expected
            assert 1 <= reads <= 2**depth


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 6).flatmap(lambda d: st.tuples(st.just(d), st.lists(st.integers(0, 1), min_size=2**d, max_size=2**d))),
       st.integers(0, 2**32))
def test_pruning_properties(case, seed):
    depth, bits = case
    inst = NandInstance(depth, bits)
    value, reads = eval_randomized_pruning(inst, seed)
    assert value == truth_table(bits)
    assert reads <= 2**depth
    assert eval_randomized_pruning(inst, seed) == (value, reads)


def brute_force_worst_case(depth):
    """Max expected reads over all inputs, via the enumerated distribution."""
    best = {0: Fraction(0), 1: Fraction(0)}
    for bits in all_inputs(depth):
        outcomes = pruning_outcomes(bits)
        mean = sum(p * q for (_, q), p in outcomes.items())
        value = truth_table(bits)
        best[value] = max(best[value], mean)
    return best[0], best[1]


def test_worst_case_small_depths():
    assert worst_case_expected_queries(0) == (1, 1)
    assert worst_case_expected_queries(1) == (2, Fraction(3, 2))
    for depth in (1, 2, 3):
        assert worst_case_expected_queries(depth) == brute_force_worst_case(depth)


def test_worst_case_ratio_converges():
    golden = (1 + math.sqrt(33)) / 4
    w = [max(worst_case_expected_queries(d)) for d in (29, 30)]
    assert float(w[1] / w[0]) == pytest.approx(golden, rel=1e-4)
    for d in range(20, 31):
        assert 0.7530 <= growth_exponent(d) <= 0.7545


def test_worst_case_cap():
    with pytest.raises(CapExceededError):
        worst_case_expected_queries(10, cap=5)


@pytest.mark.parametrize("root", [0, 1])
def test_hard_instances_attain_dp(root):
    for seed in range(3):
        inst = hard_instance(4, root, seed)
        assert eval_exact(inst) == root
        mean = sum(p * q for (_, q), p in pruning_outcomes(list(inst.bits)).items())
        assert mean == worst_case_expected_queries(4)[root]
