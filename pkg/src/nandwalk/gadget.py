"""
Oracle-exponential gadget.

``exp(-i H_O t)`` is realized with two calls to the bit-flip oracle
``U_O |k, a> = |k, a xor x_k>`` around a controlled rotation ``R(t)``.

Register states are complex vectors of length ``2**(n + 2)`` over
``|b, k, a>`` with index ``(b * N + k) * 2 + a``.
"""
from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError
from .graph import WalkSystem
from .nand import NandInstance

ANCILLA_TOL = 1e-12


@dataclass
class QueryLedger:
    """Running count of oracle invocations, broken down by phase label."""

    total: int = 0
    breakdown: Counter = field(default_factory=Counter)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self, count: int = 1, phase: str = "main") -> None:
        if count < 0:
            raise ValueError("ledger is monotone; count must be non-negative")
        with self._lock:
            self.total += count
            self.breakdown[phase] += count

    def to_json(self) -> dict:
        return {"queries_total": self.total, "breakdown": dict(self.breakdown)}


def register_dim(depth: int) -> int:
    return 2 ** (depth + 2)


def basis_index(depth: int, b: int, k: int, a: int) -> int:
    return (b * 2**depth + k) * 2 + a


def _as_register(instance: NandInstance, state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape[0] != register_dim(instance.depth):
        raise ContractError(
            f"register state has dimension {state.shape[0]}, "
            f"expected {register_dim(instance.depth)} for depth {instance.depth}"
        )
    return state


def _view(state: np.ndarray, n_leaves: int) -> np.ndarray:
    # axes: b, k, a, (batch...)
    return state.reshape((2, n_leaves, 2) + state.shape[1:])


def apply_U_O(instance: NandInstance, state, ledger: QueryLedger, phase: str = "main") -> np.ndarray:
    """Bit-flip oracle on the ``(k, a)`` registers; charges one query."""
    state = _as_register(instance, state)
    out = _view(state.copy(), instance.n_leaves)
    marked = instance.bits.astype(bool)
    out[:, marked, 0], out[:, marked, 1] = out[:, marked, 1].copy(), out[:, marked, 0].copy()
    ledger.charge(1, phase)
    return out.reshape(state.shape)


def rotation(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 1j * s], [1j * s, c]])


def controlled_R(state, t: float) -> np.ndarray:
    """Apply ``R(t)`` to register ``b`` on the ``a = 1`` subspace. Free."""
    state = np.asarray(state, dtype=complex)
    n_leaves = state.shape[0] // 4
    out = _view(state.copy(), n_leaves)
    c, s = np.cos(t), np.sin(t)
    zero, one = out[0, :, 1].copy(), out[1, :, 1].copy()
    out[0, :, 1] = c * zero + 1j * s * one
    out[1, :, 1] = 1j * s * zero + c * one
    return out.reshape(state.shape)


def _circuit(instance, state, t, ledger, phase):
    state = apply_U_O(instance, state, ledger, phase)
    state = controlled_R(state, t)
    return apply_U_O(instance, state, ledger, phase)


def ancilla_weight(state) -> float:
    """Probability of the ancilla reading 1."""
    state = np.asarray(state)
    n_leaves = state.shape[0] // 4
    return float(np.sum(np.abs(_view(state, n_leaves)[:, :, 1]) ** 2))


def gadget_evolve(instance: NandInstance, state, t: float, ledger: QueryLedger, phase: str = "main") -> np.ndarray:
    """``U_O``, controlled-``R(t)``, ``U_O``: applies ``exp(-i H_O t)`` exactly.

    The ancilla must start in ``|0>``; it is returned to ``|0>``.
    """
    state = _as_register(instance, state)
    if ancilla_weight(state) > ANCILLA_TOL:
        raise ContractError("gadget requires the ancilla register in |0>")
    return _circuit(instance, state, t, ledger, phase)


def circuit_unitary(instance: NandInstance, t: float, ledger: QueryLedger | None = None) -> np.ndarray:
    """Full ``2**(n+2)``-dimensional unitary of the three-gate circuit.

    All basis columns go through one circuit application, so ``ledger`` is
    charged 2 queries.
    """
    dim = register_dim(instance.depth)
    ledger = QueryLedger() if ledger is None else ledger
    return _circuit(instance, np.eye(dim, dtype=complex), t, ledger, "unitary")


def register_hamiltonian(instance: NandInstance) -> np.ndarray:
    """Dense ``H_O`` on ``|b, k>``: ``H_O |b, k> = -x_k |not b, k>``."""
    n_leaves = instance.n_leaves
    h = np.zeros((2 * n_leaves, 2 * n_leaves))
    for k in np.flatnonzero(instance.bits):
        h[k, n_leaves + k] = h[n_leaves + k, k] = -1.0
    return h


def embed_ancilla_zero(state_bk) -> np.ndarray:
    """Lift a ``|b, k>`` vector to ``|b, k, 0>``."""
    state_bk = np.asarray(state_bk, dtype=complex)
    out = np.zeros((state_bk.shape[0], 2) + state_bk.shape[1:], dtype=complex)
    out[:, 0] = state_bk
    return out.reshape((2 * state_bk.shape[0],) + state_bk.shape[1:])


def apply_oracle_exponential(
    system: WalkSystem, state, t: float, ledger: QueryLedger, phase: str = "main"
) -> np.ndarray:
    """``exp(-i H_O t)`` on the walk basis at the gadget's cost of two queries.

    Each pair ``(leaf(k), aux(k))`` with ``x_k = 1`` is rotated by ``R(t)``;
    the ancilla of the circuit is never materialized. ``state`` may be a
    single vector or a ``(dim, B)`` batch sharing the same inputs.
    """
    state = np.asarray(state)
    if state.shape[0] != system.dim:
        raise ContractError(f"state dimension {state.shape[0]} does not match system {system.dim}")
    out = state.astype(complex, copy=True)
    if len(system.h_o_pairs):
        rotate_pairs(out, system.h_o_pairs[:, 0], system.h_o_pairs[:, 1], t)
    ledger.charge(2, phase)
    return out


def rotate_pairs(state: np.ndarray, rows_a, rows_b, t: float, mask=None) -> None:
    """In-place ``R(t)`` on index pairs ``(rows_a[i], rows_b[i])``.

    ``mask`` of shape ``(len(rows_a), B)`` selects per-column which pairs are
    active, for batches whose columns carry different inputs.
    """
    c, s = np.cos(t), np.sin(t)
    a, b = state[rows_a], state[rows_b]
    new_a = c * a + 1j * s * b
    new_b = 1j * s * a + c * b
    if mask is not None:
        new_a = np.where(mask, new_a, a)
        new_b = np.where(mask, new_b, b)
    state[rows_a] = new_a
    state[rows_b] = new_b


def verify_gadget(max_depth: int = 3, trials: int = 20, seed=0) -> dict:
    """Compare the circuit against dense ``expm(-i H_O t)`` on random draws.

    For each depth ``0..max_depth`` and each trial, a random input and time
    are drawn; the ``a = 0`` block of the circuit unitary is compared with
    the dense exponential and the ``a = 0 -> a = 1`` block must vanish.
    """
    from scipy.linalg import expm

    rng = np.random.default_rng(seed)
    worst_dev = worst_leak = 0.0
    queries_ok = True
    draws = 0
    for depth in range(max_depth + 1):
        for _ in range(trials):
            inst = NandInstance(depth, rng.integers(0, 2, 2**depth))
            t = rng.uniform(-2 * np.pi, 2 * np.pi)
            dim = register_dim(depth)
            ledger = QueryLedger()
            cols = [basis_index(depth, b, k, 0) for b in (0, 1) for k in range(2**depth)]
            inputs = np.eye(dim, dtype=complex)[:, cols]
            out = gadget_evolve(inst, inputs, t, ledger)
            queries_ok &= ledger.total == 2
            block = _view(out, inst.n_leaves)
            kept = block[:, :, 0].reshape(2 * inst.n_leaves, -1)
            reference = expm(-1j * t * register_hamiltonian(inst))
            worst_dev = max(worst_dev, float(np.max(np.abs(kept - reference))))
            worst_leak = max(worst_leak, float(np.max(np.abs(block[:, :, 1]))))
            draws += 1
    return {
        "max_depth": max_depth,
        "draws": draws,
        "max_deviation": worst_dev,
        "max_ancilla_amplitude": worst_leak,
        "two_queries_each": bool(queries_ok),
    }
