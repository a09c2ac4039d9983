"""Optimisation-based band-model reduction."""

from .objective import Evaluation, NumericalError, ReductionProblem, cost, cost_gradient
from .params import (
    A_MARGIN,
    CUT_GAP,
    RomParameterization,
    band_emissivities,
    constraint_residual,
    constraint_system,
    eval_a,
    eval_e,
    lambda_matrix,
    project_to_feasible,
    temperature_nodes,
)
from .solver import FitReport, ReductionConfig, SolverError, gradient_check, solve
from .export import ALPHA_MAX, RomFormatError, RomModel, export_rom, load_rom, save_rom
from .sweep import (
    GridPoint,
    SweepResult,
    build_problem,
    fom_references,
    lpi_seed,
    reduce_point,
    refine_seed,
    split_band,
    sweep_grid,
    sweep_order,
)
