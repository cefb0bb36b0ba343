"""Discrete-query simulation of scattering-based NAND-tree evaluation."""
from .exceptions import BudgetExceededError, CapExceededError, ContractError, ConvergenceError
from .gadget import QueryLedger, apply_oracle_exponential, apply_U_O, controlled_R, gadget_evolve
from .graph import WalkSystem, apply_operator, build_walk_system, operator_norm
from .nand import (
    NandInstance,
    eval_exact,
    eval_randomized_pruning,
    hard_instance,
    worst_case_expected_queries,
)
from .product_formula import (
    FormulaSchedule,
    build_schedule,
    evolve_with_formula,
    measure_error,
    plan_segments,
)
from .records import ExperimentRecord, fit_loglog
from .runner import NandWalkClassifier, RunConfig, RunResult, calibrate, run_instance, sweep_scaling
from .statevector import SpectralCache, exact_evolve, prepare_wave_packet, region_probability

__version__ = "0.1.0"
