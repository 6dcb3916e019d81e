from .activation import (ActivationReport, ActivationResult, NoSamplesError, SimConfig,
                         run_activation_experiment, sample_brs, validate_activation)
from .chain import (BRSChain, NotInBRSError, brs_halfspace, optimal_inputs,
                    synthesize_trajectory, terminal_value)
from .export import boundary_csv, chain_boundary, grid_boundary
from .grid import GridSpec, ValueGrid, boundary_nodes, brs_grid
from .target import (HalfspaceTarget, TriggerSpec, g0_value, lifted_target,
                     lifted_target_value)


def in_brs(x, result, k=None, within_horizon=False):
    """Membership of ``x`` in a chain (lifted test) or value grid (interpolated)."""
    if isinstance(result, ValueGrid):
        return result.contains(x)
    if isinstance(result, BRSChain):
        return result.contains(x, k, within_horizon)
    raise TypeError(f"expected BRSChain or ValueGrid, got {type(result).__name__}")


__all__ = [
    "ActivationReport", "ActivationResult", "BRSChain", "GridSpec", "HalfspaceTarget",
    "NoSamplesError", "NotInBRSError", "SimConfig", "TriggerSpec", "ValueGrid",
    "boundary_csv", "boundary_nodes", "brs_grid", "brs_halfspace", "chain_boundary",
    "g0_value", "grid_boundary", "in_brs", "lifted_target", "lifted_target_value",
    "optimal_inputs", "run_activation_experiment", "sample_brs", "synthesize_trajectory",
    "terminal_value", "validate_activation",
]
