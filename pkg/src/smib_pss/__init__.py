"""Small-signal SMIB model with steam governor-turbine dynamics and GA/PSO
tuning of a lead-lag power system stabilizer."""

from .modal import Mode, ModeSet, analyze, classify_em_modes, damping_ratio, eigenvalues, objective_j
from .model import (
    CLOSED_LOOP_LABELS,
    OPEN_LOOP_LABELS,
    ExcitationParams,
    GovernorTurbineParams,
    HeffronConstants,
    LineLoadParams,
    MachineParams,
    OperatingCondition,
    PssParams,
    StateSpaceModel,
    SystemParams,
    build_closed_loop,
    build_closed_loop_for,
    build_open_loop,
    build_open_loop_for,
    compute_heffron_constants,
    heffron_constants_fd,
    pss_frequency_response,
)
from .optimizers import (
    PSS_BOUNDS,
    Bounds,
    GaConfig,
    OptimizationResult,
    PsoConfig,
    ga_optimize,
    inertia_weight,
    pso_optimize,
    pss_fitness,
)
from .timesim import SimConfig, Trajectory, ise, response_metrics, simulate

__version__ = "0.1.0"
