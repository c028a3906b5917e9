"""Particle swarm optimization as a discretized interacting-particle SDE system.

The package covers the memoryless and memory (local-best) swarm dynamics, the
stabilized consensus point, the mini-batch epoch driver, convergence
diagnostics and a mean-field coupling experiment.
"""

from .consensus import WeightedEnsemble, consensus_point, laplace_estimate
from .diagnostics import (
    WellPreparednessReport,
    check_well_prepared_memory,
    check_well_prepared_memoryless,
    classify_success,
    empirical_variance,
    h_memory,
    h_functional,
    h_memoryless,
    memory_parameter_bounds,
    memoryless_parameter_bounds,
)
from .dynamics import (
    StepContext,
    smoothed_switch,
    step_memory,
    step_memoryless,
    update_local_best,
)
from .estimator import ParticleSwarmMinimizer
from .exceptions import DivergenceError
from .meanfield import MfaCurve, mfa_error_curve
from .objective import (
    DataBatchPlan,
    ObjectiveFunction,
    eval_batch,
    eval_full,
    get_benchmark,
    make_data_batches,
    make_least_squares,
    make_rastrigin,
    make_sphere,
    make_sum_objective,
)
from .runner import RunConfig, RunReport, phase_diagram, run
from .schedules import ScheduleState, cooling_step, particle_decay, stagnation_kick
from .swarm import InitSpec, SwarmParams, SwarmState, apply_diffusion, init_swarm

__version__ = "0.1.0"

__all__ = [
    "DataBatchPlan",
    "DivergenceError",
    "InitSpec",
    "MfaCurve",
    "ObjectiveFunction",
    "ParticleSwarmMinimizer",
    "RunConfig",
    "RunReport",
    "ScheduleState",
    "StepContext",
    "SwarmParams",
    "SwarmState",
    "WeightedEnsemble",
    "WellPreparednessReport",
    "apply_diffusion",
    "check_well_prepared_memory",
    "check_well_prepared_memoryless",
    "classify_success",
    "consensus_point",
    "cooling_step",
    "empirical_variance",
    "eval_batch",
    "eval_full",
    "get_benchmark",
    "h_memory",
    "h_functional",
    "h_memoryless",
    "init_swarm",
    "laplace_estimate",
    "make_data_batches",
    "make_least_squares",
    "make_rastrigin",
    "make_sphere",
    "make_sum_objective",
    "memory_parameter_bounds",
    "memoryless_parameter_bounds",
    "mfa_error_curve",
    "particle_decay",
    "phase_diagram",
    "run",
    "smoothed_switch",
    "stagnation_kick",
    "step_memory",
    "step_memoryless",
    "update_local_best",
]
