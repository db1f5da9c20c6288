"""Belief propagation over Nash equilibria of a capacitated service-allocation game."""

from .bp import (BPParams, ConvergenceReport, DegenerateMessageError, Marginals, MessageSet,
                 run_fixed_t, run_mirror, unit_factor_sweep, user_factor_sweep)
from .enumerate import (ResourceError, count_nash, enumerate_nash, exact_observables,
                        full_average, sampled_average)
from .game import DomainError, best_response_dynamics, is_nash, payoff, y_to_z, z_to_y
from .instance import (GeneratorParams, Instance, InstanceParseError, generate_instance,
                       load_instance, save_instance, validate)
from .observables import ObservableSet, UndefinedObservablesError, compute_exact, compute_from_marginals
from .optimize import Estimator, StopRule, exhaustive_x, greedy_decimation

__version__ = "0.1.0"

__all__ = [
    "BPParams", "ConvergenceReport", "DegenerateMessageError", "DomainError", "Estimator",
    "GeneratorParams", "Instance", "InstanceParseError", "Marginals", "MessageSet",
    "ObservableSet", "ResourceError", "StopRule", "UndefinedObservablesError",
    "best_response_dynamics", "compute_exact", "compute_from_marginals", "count_nash",
    "enumerate_nash", "exact_observables", "exhaustive_x", "full_average", "generate_instance",
    "greedy_decimation", "is_nash", "load_instance", "payoff", "run_fixed_t", "run_mirror",
    "sampled_average", "save_instance", "unit_factor_sweep", "user_factor_sweep", "validate",
    "y_to_z", "z_to_y",
]
