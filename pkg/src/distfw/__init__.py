"""Distributed stochastic Frank-Wolfe solvers over simulated multi-agent networks."""

from .constraint import ConstraintSet, L1Ball, contains_l1, diameter_l1, lmo_l1
from .estimators import FrankWolfeClassifier
from .graph import (
    MixingMatrix,
    Topology,
    build_topology,
    k0_alpha,
    load_edge_list,
    metropolis_weights,
    second_eigenvalue,
)
from .metrics import (
    InvariantError,
    IterationRecord,
    RunLog,
    consensus_error,
    emit_csv,
    fw_gap,
    min_fw_gap_second_half,
)
from .problem import (
    FiniteSumProblem,
    LocalDataset,
    Sample,
    global_loss,
    parse_libsvm,
    partition,
    synthetic_samples,
)
from .runner import RunConfig, build_config, main, run_experiment
from .sampling import FullBatchSchedule, SamplingSchedule, draw_sample_set, epoch_length, sample_size
from .solvers import StepSchedule, make_step_schedule, run_cenfw, run_denfw, run_dstofw, step_size

__version__ = "0.1.0"

__all__ = [
    "ConstraintSet", "L1Ball", "lmo_l1", "diameter_l1", "contains_l1",
    "Topology", "MixingMatrix", "build_topology", "metropolis_weights",
    "second_eigenvalue", "k0_alpha", "load_edge_list",
    "Sample", "LocalDataset", "FiniteSumProblem", "parse_libsvm", "partition",
    "synthetic_samples", "global_loss",
    "SamplingSchedule", "FullBatchSchedule", "epoch_length", "sample_size",
    "draw_sample_set",
    "StepSchedule", "make_step_schedule", "step_size",
    "run_dstofw", "run_denfw", "run_cenfw",
    "IterationRecord", "RunLog", "InvariantError", "fw_gap", "consensus_error",
    "emit_csv", "min_fw_gap_second_half",
    "RunConfig", "build_config", "run_experiment", "main",
    "FrankWolfeClassifier",
]
