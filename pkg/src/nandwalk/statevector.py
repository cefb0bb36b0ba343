"""
State vectors on the walk basis: reference evolution, packet preparation,
and region readout.

States are plain complex ``numpy`` arrays in the flattening order of the
owning :class:`~nandwalk.graph.WalkSystem`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._config import dense_cap
from .exceptions import CapExceededError, ContractError
from .graph import WalkSystem

logger = logging.getLogger(__name__)

NORM_TOL = 1e-10
REGIONS = ("left", "right", "tree")


@dataclass(frozen=True)
class SpectralCache:
    """Eigen-decomposition ``H = V diag(w) V^dagger`` of one Hermitian term."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    term: str = "H_O+H_D"

    @classmethod
    def from_matrix(cls, matrix, term="custom"):
        matrix = np.asarray(matrix)
        if matrix.shape[0] > dense_cap():
            raise CapExceededError(
                f"dimension {matrix.shape[0]} exceeds dense cap {dense_cap()}; "
                "use a product formula instead"
            )
        w, v = np.linalg.eigh(matrix)
        return cls(w, v, term)

    @classmethod
    def from_system(cls, system: WalkSystem, term: str = "H_O+H_D"):
        key = ("spectral", term)
        cached = system._cache.get(key)
        if cached is None:
            cached = cls.from_matrix(system.dense(term), term)
            system._cache[key] = cached
        return cached

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def propagator(self, t: float) -> np.ndarray:
        """Dense ``exp(-i H t)``."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T

    def reconstruction_error(self, matrix, n_probes=4, seed=0) -> float:
        """Largest ``||H x - V w V^dagger x||`` over random unit probes."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_probes):
            x = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
            x /= np.linalg.norm(x)
            approx = self.eigenvectors @ (self.eigenvalues * (self.eigenvectors.conj().T @ x))
            worst = max(worst, float(np.linalg.norm(matrix @ x - approx)))
        return worst


def exact_evolve(cache: SpectralCache, state: np.ndarray, t: float) -> np.ndarray:
    """Return ``V exp(-i w t) V^dagger state``."""
    state = np.asarray(state)
    if state.shape[0] != cache.dim:
        raise ContractError(f"state dimension {state.shape[0]} does not match cache {cache.dim}")
    v = cache.eigenvectors
    coeffs = v.conj().T @ state
    phases = np.exp(-1j * cache.eigenvalues * t)
    if coeffs.ndim == 2:
        phases = phases[:, None]
    return check_norm(v @ (phases * coeffs))


def check_norm(state: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    """Renormalize (with a log record) when the norm drifted beyond ``tol``."""
    norms = np.linalg.norm(state, axis=0)
    drift = np.max(np.abs(norms - 1.0))
    if drift > tol:
        logger.warning("renormalizing state: norm drift %.3e exceeds %.1e", drift, tol)
        state = state / norms
    return state


def default_width(runway_len: int) -> float:
    return max(6.0, runway_len / 16)


def prepare_wave_packet(
    system: WalkSystem,
    center: float | None = None,
    width: float | None = None,
    momentum: float = -math.pi / 2,
) -> np.ndarray:
    """Gaussian packet on the runway, left of the attachment point.

    Amplitudes are ``exp(-(j - center)^2 / (4 width^2)) exp(i momentum j)``
    on runway vertex ``j`` and zero elsewhere. With the default momentum the
    packet has energy near 0 and moves toward the tree at speed 2.

    ``center`` defaults to the rightmost admissible value
    ``attach - 1 - 4 * width``.
    """
    width = default_width(system.runway_len) if width is None else float(width)
    if width <= 0:
        raise ValueError("width must be positive")
    if center is None:
        center = system.attach - 1 - 4 * width
    lo, hi = center - 4 * width, center + 4 * width
    if lo < 1 or hi > system.attach - 1:
        raise ContractError(
            f"packet support [{lo:.1f}, {hi:.1f}] must lie inside [1, {system.attach - 1}] "
            "(left of the attachment point)"
        )
    j = np.arange(1, system.runway_len + 1)
    psi = np.zeros(system.dim, dtype=complex)
    psi[: system.runway_len] = np.exp(-((j - center) ** 2) / (4 * width**2) + 1j * momentum * j)
    return psi / np.linalg.norm(psi)


def region_slices(system: WalkSystem) -> dict[str, slice]:
    """Index ranges of the three readout regions.

    ``left`` is runway ``1..attach-1``, ``right`` is runway ``attach+1..M``,
    and ``tree`` is the junction vertex ``runway(attach)`` plus every tree and
    aux vertex. Together they partition the basis.
    """
    a = system.attach
    return {
        "left": slice(0, a - 1),
        "right": slice(a, system.runway_len),
        "junction": slice(a - 1, a),
        "tree": slice(system.runway_len, system.dim),
    }


def region_probability(system: WalkSystem, state: np.ndarray, region: str):
    """Probability mass on ``region`` (one of ``left``, ``right``, ``tree``)."""
    state = np.asarray(state)
    if state.shape[0] != system.dim:
        raise ContractError(f"state dimension {state.shape[0]} does not match system {system.dim}")
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")
    probs = np.abs(state) ** 2
    sl = region_slices(system)
    total = probs[sl[region]].sum(axis=0)
    if region == "tree":
        total = total + probs[sl["junction"]].sum(axis=0)
    return total


def position_expectation(system: WalkSystem, state: np.ndarray) -> float:
    """Mean runway position, conditioned on being on the runway."""
    probs = np.abs(state[: system.runway_len]) ** 2
    j = np.arange(1, system.runway_len + 1)
    return float(probs @ j / probs.sum())


def energy(system: WalkSystem, state: np.ndarray, term: str = "H_O+H_D") -> float:
    return float(np.real(np.vdot(state, system.sparse(term) @ state)))


def state_to_json(state: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(state).ravel()]


def state_from_json(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]
