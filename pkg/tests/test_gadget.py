import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nandwalk.exceptions import ContractError
from nandwalk.gadget import (
    QueryLedger,
    ancilla_weight,
    apply_oracle_exponential,
    apply_U_O,
    basis_index,
    circuit_unitary,
    controlled_R,
    embed_ancilla_zero,
    gadget_evolve,
    register_dim,
    register_hamiltonian,
    rotation,
    verify_gadget,
)
from nandwalk.graph import build_walk_system
from nandwalk.nand import NandInstance
from nandwalk.statevector import SpectralCache, exact_evolve


def basis(depth, b, k, a):
    v = np.zeros(register_dim(depth), dtype=complex)
    v[basis_index(depth, b, k, a)] = 1
    return v


def random_register(depth, seed, ancilla_zero=True):
    rng = np.random.default_rng(seed)
    bk = rng.standard_normal(2 ** (depth + 1)) + 1j * rng.standard_normal(2 ** (depth + 1))
    bk /= np.linalg.norm(bk)
    if ancilla_zero:
        return embed_ancilla_zero(bk)
    v = rng.standard_normal(register_dim(depth)) + 1j * rng.standard_normal(register_dim(depth))
    return v / np.linalg.norm(v)


def test_U_O_flips_marked_ancilla():
    inst = NandInstance(2, [0, 1, 0, 1])
    ledger = QueryLedger()
    for b in (0, 1):
        out = apply_U_O(inst, basis(2, b, 1, 0), ledger)
        assert np.array_equal(out, basis(2, b, 1, 1))
        for a in (0, 1):
            assert np.array_equal(apply_U_O(inst, basis(2, b, 2, a), ledger), basis(2, b, 2, a))
    assert ledger.total == 6


def test_U_O_involution():
    inst = NandInstance(3, [1, 0, 1, 1, 0, 0, 1, 0])
    x = random_register(3, 1, ancilla_zero=False)
    ledger = QueryLedger()
    twice = apply_U_O(inst, apply_U_O(inst, x, ledger), ledger)
    assert np.array_equal(twice, x)
    assert ledger.total == 2


def test_controlled_R_examples():
    x = random_register(2, 2, ancilla_zero=False)
    assert np.allclose(controlled_R(x, 0.0), x, atol=0)
    out = controlled_R(basis(2, 0, 3, 1), math.pi / 2)
    assert np.allclose(out, 1j * basis(2, 1, 3, 1), atol=1e-15)
    # a = 0 subspace untouched
    assert np.array_equal(controlled_R(basis(2, 1, 0, 0), 1.3), basis(2, 1, 0, 0))


def test_rotation_unitary():
    rng = np.random.default_rng(0)
    for t in rng.uniform(-10, 10, 20):
        r = rotation(t)
        assert np.max(np.abs(r @ r.conj().T - np.eye(2))) <= 1e-14


def test_gadget_action_on_basis_states():
    inst = NandInstance(1, [0, 1])
    ledger = QueryLedger()
    t = 0.83
    unchanged = gadget_evolve(inst, basis(1, 0, 0, 0), t, ledger)
    assert np.allclose(unchanged, basis(1, 0, 0, 0), atol=1e-15)
    out = gadget_evolve(inst, basis(1, 0, 1, 0), t, ledger)
    expected = math.cos(t) * basis(1, 0, 1, 0) + 1j * math.sin(t) * basis(1, 1, 1, 0)
    assert np.allclose(out, expected, atol=1e-15)
    assert ledger.total == 4


@pytest.mark.parametrize("depth", [0, 1, 2, 3])
def test_gadget_matches_dense_exponential(depth):
    rng = np.random.default_rng(depth)
    for _ in range(20):
        inst = NandInstance(depth, rng.integers(0, 2, 2**depth))
        t = rng.uniform(-7, 7)
        u = circuit_unitary(inst, t)
        n2 = 2 ** (depth + 1)
        # reorder |b,k,a> into (a, (b,k)) blocks
        blocks = u.reshape(n2, 2, n2, 2)
        reference = expm(-1j * t * register_hamiltonian(inst))
        assert np.max(np.abs(blocks[:, 0, :, 0] - reference)) <= 1e-12
        assert np.max(np.abs(blocks[:, 1, :, 0])) <= 1e-12
        assert np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= 1e-12


def test_verify_gadget_report():
    report = verify_gadget(3, 20, seed=7)
    assert report["draws"] == 80
    assert report["max_deviation"] <= 1e-12
    assert report["max_ancilla_amplitude"] <= 1e-12
    assert report["two_queries_each"]


def test_gadget_restores_ancilla_and_refuses_dirty_input():
    inst = NandInstance(2, [1, 1, 0, 1])
    out = gadget_evolve(inst, random_register(2, 4), 2.2, QueryLedger())
    assert ancilla_weight(out) <= 1e-24
    with pytest.raises(ContractError):
        gadget_evolve(inst, random_register(2, 4, ancilla_zero=False), 1.0, QueryLedger())
    with pytest.raises(ContractError):
        apply_U_O(inst, np.zeros(8), QueryLedger())


def test_register_hamiltonian_sign():
    inst = NandInstance(1, [1, 0])
    h = register_hamiltonian(inst)
    # H_O |0, 0> = -|1, 0>, H_O |b, 1> = 0
    assert h[2, 0] == -1 and h[0, 2] == -1
    assert not h[:, 1].any() and not h[:, 3].any()


def walk_system(depth, seed):
    inst = NandInstance(depth, np.random.default_rng(seed).integers(0, 2, 2**depth))
    return build_walk_system(inst, 6)


@pytest.mark.parametrize("depth", [0, 1, 2, 3, 4])
def test_fast_path_matches_spectral_reference(depth):
    system = walk_system(depth, 10 + depth)
    cache = SpectralCache.from_system(system, "H_O")
    rng = np.random.default_rng(depth)
    for _ in range(5):
        x = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
        x /= np.linalg.norm(x)
        t = rng.uniform(-5, 5)
        ledger = QueryLedger()
        fast = apply_oracle_exponential(system, x, t, ledger)
        assert np.max(np.abs(fast - exact_evolve(cache, x, t))) <= 1e-12
        assert abs(np.linalg.norm(fast) - 1) <= 1e-12
        assert ledger.total == 2


def test_fast_path_matches_circuit():
    # walk basis leaf(k)/aux(k) <-> register |0,k,0>/|1,k,0>
    system = walk_system(3, 99)
    inst = system.instance
    rng = np.random.default_rng(1)
    x = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
    t = 1.9
    fast = apply_oracle_exponential(system, x, t, QueryLedger())
    bk = np.concatenate([x[system.leaf_indices], x[system.aux_indices]])
    circ = gadget_evolve(inst, embed_ancilla_zero(bk), t, QueryLedger()).reshape(-1, 2)[:, 0]
    assert np.allclose(np.concatenate([fast[system.leaf_indices], fast[system.aux_indices]]), circ, atol=1e-14)


def test_all_zero_input_still_charged():
    system = build_walk_system(NandInstance(2, [0, 0, 0, 0]), 5)
    x = np.arange(system.dim, dtype=complex)
    ledger = QueryLedger()
    assert np.array_equal(apply_oracle_exponential(system, x, 3.0, ledger), x)
    assert ledger.total == 2


def test_composition_costs_more():
    system = walk_system(2, 3)
    x = np.random.default_rng(2).standard_normal(system.dim).astype(complex)
    one, two = QueryLedger(), QueryLedger()
    a = apply_oracle_exponential(system, apply_oracle_exponential(system, x, 0.4, two), 1.1, two)
    b = apply_oracle_exponential(system, x, 1.5, one)
    assert np.max(np.abs(a - b)) <= 1e-12
    assert (one.total, two.total) == (2, 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["U", "gadget", "fast"]), max_size=12), st.integers(0, 1000))
def test_ledger_accounting(ops, seed):
    system = walk_system(1, seed)
    inst = system.instance
    ledger = QueryLedger()
    reg = random_register(1, seed)
    walk = np.ones(system.dim, dtype=complex) / math.sqrt(system.dim)
    for i, op in enumerate(ops):
        if op == "U":
            apply_U_O(inst, random_register(1, i, ancilla_zero=False), ledger, phase="bare")
        elif op == "gadget":
            reg = gadget_evolve(inst, reg, 0.1 * i, ledger, phase="gadget")
        else:
            walk = apply_oracle_exponential(system, walk, 0.2 * i, ledger, phase="fast")
    expected = ops.count("U") + 2 * (ops.count("gadget") + ops.count("fast"))
    assert ledger.total == expected == sum(ledger.breakdown.values())
    assert ledger.to_json()["queries_total"] == expected


def test_ledger_is_monotone():
    with pytest.raises(ValueError):
        QueryLedger().charge(-1)
