"""
Walk basis and the two Hamiltonian terms.

The basis is flattened as: runway vertices ``1..M`` ascending, then internal
tree nodes in heap order, then ``leaf(k)`` ascending, then ``aux(k)``
ascending. ``leaf(k)`` and ``aux(k)`` play the roles of the oracle states
``|0, k>`` and ``|1, k>``.

``H_D`` is the 0/1 adjacency matrix of runway path + tree (root hung off
``runway(attach)``); ``H_O`` couples ``leaf(k)`` to ``aux(k)`` with weight
``-x_k``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._config import DEFAULT_DIM_CAP, dense_cap
from .exceptions import CapExceededError, ContractError, ConvergenceError
from .nand import NandInstance

logger = logging.getLogger(__name__)

TERMS = ("H_O", "H_D", "H_O+H_D")


def default_runway_length(depth: int, runway_const: float = 8.0) -> int:
    """``c * ceil(sqrt(N * max(1, ln N)))`` for ``N = 2**depth``."""
    return int(math.ceil(runway_const * time_scale_units(depth)))


def time_scale(depth: int) -> float:
    n_leaves = 2**depth
    return math.sqrt(n_leaves * max(1.0, math.log(n_leaves)))


def time_scale_units(depth: int) -> int:
    return math.ceil(time_scale(depth))


@dataclass(frozen=True, eq=False)
class WalkSystem:
    """Runway-plus-tree walk for one NAND instance.

    Use :func:`build_walk_system` to construct. Edge arrays are read-only and
    the object is safe to share between threads.
    """

    instance: NandInstance
    runway_len: int
    attach: int
    h_d_edges: np.ndarray
    h_o_pairs: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def depth(self) -> int:
        return self.instance.depth

    @property
    def n_leaves(self) -> int:
        return self.instance.n_leaves

    @property
    def dim(self) -> int:
        return self.runway_len + (self.n_leaves - 1) + 2 * self.n_leaves

    def runway(self, j: int) -> int:
        if not 1 <= j <= self.runway_len:
            raise IndexError(f"runway position {j} outside 1..{self.runway_len}")
        return j - 1

    def internal(self, node: int) -> int:
        if not 1 <= node < self.n_leaves:
            raise IndexError(f"internal node {node} outside 1..{self.n_leaves - 1}")
        return self.runway_len + node - 1

    def leaf(self, k: int) -> int:
        if not 0 <= k < self.n_leaves:
            raise IndexError(f"leaf {k} outside 0..{self.n_leaves - 1}")
        return self.runway_len + self.n_leaves - 1 + k

    def aux(self, k: int) -> int:
        return self.leaf(k) + self.n_leaves

    @property
    def root(self) -> int:
        return self.internal(1) if self.depth > 0 else self.leaf(0)

    @cached_property
    def leaf_indices(self) -> np.ndarray:
        return self.runway_len + self.n_leaves - 1 + np.arange(self.n_leaves)

    @cached_property
    def aux_indices(self) -> np.ndarray:
        return self.leaf_indices + self.n_leaves

    def vertex_label(self, index: int) -> tuple[str, int]:
        """Inverse of the flattening: ``(role, position)`` for a dense index."""
        M, N = self.runway_len, self.n_leaves
        if not 0 <= index < self.dim:
            raise IndexError(index)
        if index < M:
            return "runway", index + 1
        index -= M
        if index < N - 1:
            return "internal", index + 1
        index -= N - 1
        if index < N:
            return "leaf", index
        return "aux", index - N

    def sparse(self, which: str = "H_O+H_D") -> sp.csr_matrix:
        """CSR matrix of a term, built once from the edge lists."""
        _check_term(which)
        if which not in self._cache:
            if which == "H_O+H_D":
                mat = self.sparse("H_D") + self.sparse("H_O")
            else:
                if which == "H_D":
                    rows, cols = self.h_d_edges[:, 0], self.h_d_edges[:, 1]
                    w = np.ones(len(rows))
                else:
                    rows = self.h_o_pairs[:, 0].astype(np.int64)
                    cols = self.h_o_pairs[:, 1].astype(np.int64)
                    w = self.h_o_pairs[:, 2].astype(float)
                mat = sp.coo_matrix(
                    (np.concatenate([w, w]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                    shape=(self.dim, self.dim),
                )
            self._cache[which] = sp.csr_matrix(mat)
        return self._cache[which]

    def dense(self, which: str = "H_O+H_D") -> np.ndarray:
        cap = dense_cap()
        if self.dim > cap:
            raise CapExceededError(f"dimension {self.dim} exceeds dense cap {cap}")
        return self.sparse(which).toarray()

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.dim, dtype=int)
        np.add.at(deg, self.h_d_edges.ravel(), 1)
        return deg

    def with_instance(self, instance: NandInstance) -> "WalkSystem":
        """Same geometry, different inputs (``H_D`` is shared unchanged)."""
        return build_walk_system(instance, self.runway_len, self.attach)


def _check_term(which):
    if which not in TERMS:
        raise ValueError(f"unknown term {which!r}; expected one of {TERMS}")


def build_walk_system(
    instance: NandInstance,
    runway_len: int | None = None,
    attach: int | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> WalkSystem:
    """Build the walk basis and the edge lists of ``H_D`` and ``H_O``.

    Parameters
    ----------
    instance : NandInstance
    runway_len : int, optional
        Runway length ``M >= 2``. Defaults to :func:`default_runway_length`.
    attach : int, optional
        Runway position the root hangs from, ``1 <= attach <= M``. Defaults
        to ``ceil(M / 2)``.
    dim_cap : int
        Refuse to build systems with more basis states than this.
    """
    M = default_runway_length(instance.depth) if runway_len is None else int(runway_len)
    if M < 2:
        raise ValueError(f"runway length must be >= 2, got {M}")
    attach = math.ceil(M / 2) if attach is None else int(attach)
    if not 1 <= attach <= M:
        raise ValueError(f"attach must lie in 1..{M}, got {attach}")
    N = instance.n_leaves
    dim = M + (N - 1) + 2 * N
    if dim > dim_cap:
        raise CapExceededError(f"dimension {dim} exceeds cap {dim_cap}")

    internal0 = M - 1  # dense index of internal(i) is internal0 + i
    leaf0 = M + N - 1

    edges = [(j, j + 1) for j in range(M - 1)]
    root = internal0 + 1 if N > 1 else leaf0
    edges.append((attach - 1, root))
    for i in range(1, N):
        for c in (2 * i, 2 * i + 1):
            child = internal0 + c if c < N else leaf0 + c - N
            edges.append((internal0 + i, child))
    h_d_edges = np.array(edges, dtype=np.int64).reshape(-1, 2)

    ks = np.flatnonzero(instance.bits)
    h_o_pairs = np.column_stack([leaf0 + ks, leaf0 + N + ks, -np.ones(len(ks))]).astype(np.int64)
    h_o_pairs = h_o_pairs.reshape(-1, 3)

    for arr in (h_d_edges, h_o_pairs):
        arr.setflags(write=False)
    return WalkSystem(instance, M, attach, h_d_edges, h_o_pairs)


def apply_operator(system: WalkSystem, which: str, state: np.ndarray) -> np.ndarray:
    """Return ``H @ state`` for one term (or their sum).

    ``state`` may be a vector of length ``dim`` or a ``(dim, B)`` batch.
    """
    state = np.asarray(state)
    if state.shape[0] != system.dim:
        raise ContractError(f"state has leading dimension {state.shape[0]}, system has {system.dim}")
    return system.sparse(which) @ state


def operator_norm(
    system: WalkSystem,
    which: str = "H_O+H_D",
    rtol: float = 1e-6,
    max_iter: int = 200_000,
    seed: int = 0,
) -> float:
    """Spectral norm by power iteration on the operator itself.

    The estimate is ``sqrt(<x|H^2|x>)`` for the normalized iterate ``x``; for
    a Hermitian operator this converges to the largest ``|eigenvalue|`` even
    when ``+lambda`` and ``-lambda`` are both present (bipartite graphs).
    Stops once successive estimates agree to ``rtol**2`` relative.
    """
    mat = system.sparse(which)
    if mat.nnz == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(system.dim)
    x /= np.linalg.norm(x)
    estimate = 0.0
    tol = rtol**2
    for it in range(1, max_iter + 1):
        y = mat @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # x landed in the kernel; restart from a fresh random vector
            x = rng.standard_normal(system.dim)
            x /= np.linalg.norm(x)
            continue
        if abs(ny - estimate) <= tol * ny:
            return float(ny)
        estimate = ny
        x = y / ny
    raise ConvergenceError(
        f"power iteration for {which} did not converge in {max_iter} iterations "
        f"(last estimate {estimate:.9g}, dim {system.dim})"
    )


def system_to_json(system: WalkSystem) -> dict:
    return {
        "dim": system.dim,
        "runway_len": system.runway_len,
        "attach": system.attach,
        "h_d_edges": system.h_d_edges.tolist(),
        "h_o_pairs": [[int(a), int(b), int(w)] for a, b, w in system.h_o_pairs],
    }
