"""Simulation and numerics for the reaction-diffusion equation
du/dt = kappa * Delta u + xi u with a symmetric-exclusion catalyst xi:
event-driven catalyst simulation, exact semigroup computations on small tori,
Feynman-Kac Monte Carlo, Rayleigh-Ritz spectral solvers, and the deterministic
field estimates entering the large-diffusion asymptotics.
"""

from .exact import OperatorSpec
from .exclusion import Configuration, LinkSchedule, Trajectory, build_schedule, \
    evolve, occupation_time, sample_initial
from .harness import Report, ScenarioConfig, emit_figures_data, run_scenario
from .irw import WeightFunction, compare_se_irw, irw_exp_functional
from .lattice import HeatKernelTable, Kernel, Torus, green, srw_kernel, \
    transition_prob
from .montecarlo import McEstimate, ModelParams, estimate_moment, lambda_curve

__version__ = "0.1.0"

__all__ = [
    "Configuration", "HeatKernelTable", "Kernel", "LinkSchedule", "McEstimate",
    "ModelParams", "OperatorSpec", "Report", "ScenarioConfig", "Torus",
    "Trajectory", "WeightFunction", "build_schedule", "compare_se_irw",
    "emit_figures_data", "estimate_moment", "evolve", "green",
    "irw_exp_functional", "lambda_curve", "occupation_time", "run_scenario",
    "sample_initial", "srw_kernel", "transition_prob",
]
