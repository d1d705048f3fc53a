"""Accelerated projection-based consensus linear solvers and baselines."""

from .ingest import PartitionedSystem, parse_matrix_market, partition_rows, synth_gaussian
from .spectral import SpectralSummary, MethodParams, apc_optimal_params, compute_X
from .solvers import Budget, run_apc
from .trace import IterationTrace, fit_rate

__all__ = [
    "PartitionedSystem", "parse_matrix_market", "partition_rows", "synth_gaussian",
    "SpectralSummary", "MethodParams", "apc_optimal_params", "compute_X",
    "Budget", "run_apc", "IterationTrace", "fit_rate",
]

__version__ = "0.1.0"
