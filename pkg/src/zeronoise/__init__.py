"""Simulation laboratory for zero-noise selection in ``dX = sgn(X)|X|^gamma dt + eps dW``."""
from .bounds import TheoremParams, doob_event_bound, theorem_params
from .experiments import ExperimentReport, classify_path, run_experiment, sweep, wasserstein_to_limit
from .sde import PathSample, SimConfig, simulate_path
from .trajectories import EnvelopeShift, extremal_value, shift_R

__version__ = "0.1.0"

__all__ = [
    "EnvelopeShift", "ExperimentReport", "PathSample", "SimConfig", "TheoremParams",
    "classify_path", "doob_event_bound", "extremal_value", "run_experiment", "shift_R",
    "simulate_path", "sweep", "theorem_params", "wasserstein_to_limit",
]
