"""
Suzuki product formulas for ``exp(-i (H_D + H_O) t)``.

``A`` denotes ``H_D`` (query-free) and ``B`` denotes ``H_O`` (two oracle
queries per exponential through the gadget). The order-``2k`` formula is

    S_2(l)  = A(l/2) B(l) A(l/2)
    S_2k(l) = S_{2k-2}(p l)^2 S_{2k-2}((1 - 4p) l) S_{2k-2}(p l)^2,
    p = 1 / (4 - 4**(1/(2k-1)))

repeated over ``r`` segments of length ``l = t / r``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Sequence

import numpy as np

from .exceptions import BudgetExceededError, CapExceededError, ContractError
from .gadget import QueryLedger, apply_oracle_exponential, rotate_pairs
from .graph import WalkSystem
from .statevector import SpectralCache, check_norm, exact_evolve

logger = logging.getLogger(__name__)

MAX_ORDER_INDEX = 4
DEFAULT_SEGMENT_BUDGET = 10**8
NORM_BOUND = 3.0


def suzuki_weight(k: int) -> float:
    """``p_k = 1 / (4 - 4**(1 / (2k - 1)))``."""
    if k < 2:
        raise ValueError("recursion weights are defined for k >= 2")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def _merge(factors):
    merged = []
    for tag, c in factors:
        if merged and merged[-1][0] == tag:
            merged[-1] = (tag, merged[-1][1] + c)
        else:
            merged.append((tag, c))
    return merged


@lru_cache(maxsize=None)
def segment_coefficients(k: int) -> tuple[tuple[str, float], ...]:
    """Merged ``(term, multiple of segment length)`` factors of ``S_2k``."""
    if k < 1:
        raise ValueError("order index must be >= 1")
    if k > MAX_ORDER_INDEX:
        raise CapExceededError(f"order index {k} exceeds cap {MAX_ORDER_INDEX}")

    def build(level, scale):
        if level == 1:
            return [("A", scale / 2), ("B", scale), ("A", scale / 2)]
        p = suzuki_weight(level)
        outer = build(level - 1, p * scale)
        return outer + outer + build(level - 1, (1 - 4 * p) * scale) + outer + outer

    return tuple(_merge(build(k, 1.0)))


@dataclass(frozen=True)
class FormulaSchedule:
    """One Suzuki segment plus the number of segments.

    ``factors`` holds ``(term, coefficient)`` with durations
    ``coefficient * segment_length``; ``term`` is ``"A"`` (``H_D``) or
    ``"B"`` (``H_O``).
    """

    order_index: int
    factors: tuple[tuple[str, float], ...]
    segments: int
    total_time: float

    @property
    def order(self) -> int:
        return 2 * self.order_index

    @property
    def segment_length(self) -> float:
        return self.total_time / self.segments

    @property
    def durations(self) -> list[tuple[str, float]]:
        lam = self.segment_length
        return [(tag, c * lam) for tag, c in self.factors]

    @property
    def b_factors_per_segment(self) -> int:
        return sum(1 for tag, _ in self.factors if tag == "B")

    @property
    def queries(self) -> int:
        """Oracle queries spent executing the whole schedule."""
        return 2 * self.b_factors_per_segment * self.segments

    def iter_factors(self) -> Iterator[tuple[str, float]]:
        """All ``(term, duration)`` factors over every segment.

        Trailing and leading ``A`` factors of neighbouring segments are
        merged.
        """
        seg = self.durations
        first_a = seg[0][0] == "A" and seg[-1][0] == "A"
        for i in range(self.segments):
            start = 1 if (first_a and i > 0) else 0
            for j in range(start, len(seg)):
                tag, d = seg[j]
                if first_a and j == len(seg) - 1 and i < self.segments - 1:
                    yield tag, d + seg[0][1]
                else:
                    yield tag, d


def build_schedule(k: int, t: float, r: int) -> FormulaSchedule:
    if r < 1 or int(r) != r:
        raise ValueError(f"segment count must be a positive integer, got {r}")
    if not t > 0:
        raise ValueError(f"total time must be positive, got {t}")
    return FormulaSchedule(int(k), segment_coefficients(int(k)), int(r), float(t))


@lru_cache(maxsize=1)
def _shipped_constants() -> dict:
    text = resources.files("nandwalk").joinpath("data/trotter_constants.json").read_text()
    return json.loads(text)


def calibration_constants() -> dict[int, float]:
    """Frozen ``c_k`` used by :func:`plan_segments`."""
    return {int(k): float(v) for k, v in _shipped_constants()["constants"].items()}


def plan_segments(
    k: int,
    t: float,
    h: float = NORM_BOUND,
    eps_sim: float = 1e-2,
    constants: dict | None = None,
    budget: int = DEFAULT_SEGMENT_BUDGET,
) -> int:
    """Segments needed for simulation error ``eps_sim``.

    ``r = ceil((h t)^(1 + 1/(2k)) (c_k / eps_sim)^(1/(2k)))``.
    """
    if not t > 0 or not h > 0:
        raise ValueError("t and h must be positive")
    if not 0 < eps_sim < 1:
        raise ValueError("eps_sim must lie in (0, 1)")
    constants = calibration_constants() if constants is None else constants
    if k not in constants:
        raise CapExceededError(f"no calibration constant for order index {k}")
    c_k = constants[k]
    r = math.ceil((h * t) ** (1 + 1 / (2 * k)) * (c_k / eps_sim) ** (1 / (2 * k)) - 1e-9)
    r = max(r, 1)
    if r > budget:
        raise BudgetExceededError(f"planned {r} segments exceeds budget {budget}", r)
    return r


class _PropagatorCache:
    """``exp(-i H_D tau)`` per distinct duration, from one eigendecomposition."""

    def __init__(self, system: WalkSystem):
        try:
            self.spectral = SpectralCache.from_system(system, "H_D")
        except CapExceededError as exc:
            raise CapExceededError(
                f"{exc}; the H_D exponentials need a dense spectral cache. "
                "Raise NANDWALK_DENSE_CAP or use a smaller runway/depth."
            ) from exc
        self._props = system._cache.setdefault("H_D_propagators", {})

    def __call__(self, tau):
        key = round(tau, 14)
        prop = self._props.get(key)
        if prop is None:
            prop = self.spectral.propagator(tau)
            self._props[key] = prop
        return prop


def evolve_with_formula(
    system: WalkSystem,
    state,
    schedule: FormulaSchedule,
    ledger: QueryLedger,
    phase: str = "evolve",
) -> np.ndarray:
    """Apply the schedule left to right; each ``B`` factor costs two queries."""
    state = np.asarray(state, dtype=complex)
    if state.shape[0] != system.dim:
        raise ContractError(f"state dimension {state.shape[0]} does not match system {system.dim}")
    prop = _PropagatorCache(system)
    for tag, tau in schedule.iter_factors():
        if tag == "A":
            state = prop(tau) @ state
        else:
            state = apply_oracle_exponential(system, state, tau, ledger, phase)
    return check_norm(state, 1e-10)


def evolve_batch(
    systems: Sequence[WalkSystem],
    states: np.ndarray,
    schedule: FormulaSchedule,
    ledgers: Sequence[QueryLedger],
    phase: str = "evolve",
) -> np.ndarray:
    """Evolve one state per system, all systems sharing ``H_D``.

    Column ``i`` of ``states`` belongs to ``systems[i]`` and is charged to
    ``ledgers[i]``. Equivalent to calling :func:`evolve_with_formula` per
    column, but the ``A`` exponentials are applied as one matrix product.
    """
    ref = systems[0]
    for s in systems[1:]:
        if (s.runway_len, s.attach, s.depth) != (ref.runway_len, ref.attach, ref.depth):
            raise ContractError("batched systems must share runway length, attachment and depth")
    states = np.asarray(states, dtype=complex)
    if states.shape != (ref.dim, len(systems)):
        raise ContractError(f"states must have shape {(ref.dim, len(systems))}, got {states.shape}")
    mask = np.stack([s.instance.bits.astype(bool) for s in systems], axis=1)
    leaves, auxes = ref.leaf_indices, ref.aux_indices
    prop = _PropagatorCache(ref)
    n_b = 0
    for tag, tau in schedule.iter_factors():
        if tag == "A":
            states = prop(tau) @ states
        else:
            rotate_pairs(states, leaves, auxes, tau, mask)
            n_b += 1
    for ledger in ledgers:
        ledger.charge(2 * n_b, phase)
    return check_norm(states, 1e-10)


def measure_error(system: WalkSystem, t: float, k: int, r: int, probe) -> float:
    """``|| formula(probe) - exp(-i (H_O + H_D) t) probe ||``."""
    probe = np.asarray(probe, dtype=complex)
    if t == 0:
        return 0.0
    exact = exact_evolve(SpectralCache.from_system(system, "H_O+H_D"), probe, t)
    approx = evolve_with_formula(system, probe, build_schedule(k, t, r), QueryLedger())
    return float(np.linalg.norm(approx - exact))


def error_constant(error: float, k: int, t: float, lam: float, h: float = NORM_BOUND) -> float:
    """Invert the planner's error model ``err = c_k h^(2k+1) t lam^(2k)``."""
    return error / (h ** (2 * k + 1) * t * lam ** (2 * k))


CALIBRATION_SYSTEMS = ((2, 16), (3, 32))


def calibrate_constants(
    orders: Sequence[int] = (1, 2, 3, 4),
    systems: Sequence[tuple[int, int]] = CALIBRATION_SYSTEMS,
    times: Sequence[float] = (2.0, 10.0),
    segment_ladder: Sequence[int] = (1, 2, 4, 8, 16, 32, 64, 128),
    n_probes: int = 3,
    safety: float = 2.0,
    error_window: tuple[float, float] = (1e-10, 1e-1),
    seed: int = 0,
) -> dict:
    """Fit ``c_k`` from error ladders on small systems.

    Each measured error inside ``error_window`` (above round-off, inside the
    asymptotic regime) gives one estimate through :func:`error_constant`; the
    frozen value is ``safety`` times the largest estimate.
    """
    from .nand import NandInstance
    from .graph import build_walk_system

    rng = np.random.default_rng(seed)
    lo, hi = error_window
    constants, rows = {}, []
    for k in orders:
        estimates = []
        for depth, runway in systems:
            inst = NandInstance(depth, rng.integers(0, 2, 2**depth))
            system = build_walk_system(inst, runway)
            for _ in range(n_probes):
                probe = rng.standard_normal(system.dim) + 1j * rng.standard_normal(system.dim)
                probe /= np.linalg.norm(probe)
                for t in times:
                    for r in segment_ladder:
                        err = measure_error(system, t, k, r, probe)
                        lam = t / r
                        rows.append((depth, runway, k, t, r, lam, err))
                        if lo < err < hi:
                            estimates.append(error_constant(err, k, t, lam))
        if not estimates:
            raise RuntimeError(f"no usable error measurements for k={k}")
        constants[k] = safety * max(estimates)
    return {"constants": constants, "rows": rows}


def write_constants(constants: dict, path, command: str) -> None:
    payload = {
        "command": command,
        "error_model": "err = c_k * h**(2k+1) * t * lambda**(2k), h = 3",
        "constants": {str(k): v for k, v in sorted(constants.items())},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _shipped_constants.cache_clear()
