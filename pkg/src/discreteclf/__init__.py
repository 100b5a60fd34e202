"""Interpretable discrete linear classifiers trained by exact integer programming."""

__version__ = "0.1.0"

from .benders import BendersOptions, BendersResult, LossOracle, benders_solve, oracle_eval
from .bounds import (
    coprime_count,
    density_table,
    kth_margin_lambda,
    l0_hypothesis_count,
    margin_profile,
    min_margin_lambda,
    occam_gap,
    round_to_grid,
)
from .coefsets import InterpretabilitySet, digit_pattern_values
from .data import (
    BinaryRuleSet,
    ClassWeights,
    DataError,
    Dataset,
    binarize,
    dataset_from_arrays,
    load_dataset,
    make_weights,
)
from .formulation import (
    IntegerProgram,
    PenaltyConfig,
    PersonalizedLevels,
    add_operational_constraints,
    adjust_penalty_for_missing,
    build_mofn,
    build_pilm,
    build_program,
    build_slim,
    build_tilm,
    compute_big_m,
    default_l1_tiebreak,
)
from .models import TrainedModel, classification_metrics, render
from .problem import DiscreteProblem, OperationalConstraints, predict
from .reduction import ReductionConfig, ReductionResult, epsilon_from_feasible, reduce
from .solver import SolveOptions, SolveResult, brute_force, solve
from .training import ConfigError, cross_validate, resolve_config, sweep_regularization, train

__all__ = [
    "__version__",
    "BendersOptions",
    "BendersResult",
    "LossOracle",
    "benders_solve",
    "oracle_eval",
    "coprime_count",
    "density_table",
    "kth_margin_lambda",
    "l0_hypothesis_count",
    "margin_profile",
    "min_margin_lambda",
    "occam_gap",
    "round_to_grid",
    "InterpretabilitySet",
    "digit_pattern_values",
    "BinaryRuleSet",
    "ClassWeights",
    "DataError",
    "Dataset",
    "binarize",
    "dataset_from_arrays",
    "load_dataset",
    "make_weights",
    "IntegerProgram",
    "PenaltyConfig",
    "PersonalizedLevels",
    "add_operational_constraints",
    "adjust_penalty_for_missing",
    "build_mofn",
    "build_pilm",
    "build_program",
    "build_slim",
    "build_tilm",
    "compute_big_m",
    "default_l1_tiebreak",
    "TrainedModel",
    "classification_metrics",
    "render",
    "DiscreteProblem",
    "OperationalConstraints",
    "predict",
    "ReductionConfig",
    "ReductionResult",
    "epsilon_from_feasible",
    "reduce",
    "SolveOptions",
    "SolveResult",
    "brute_force",
    "solve",
    "ConfigError",
    "cross_validate",
    "resolve_config",
    "sweep_regularization",
    "train",
]
