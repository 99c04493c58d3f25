"""Age-of-information vs. energy scheduling: exact solvers, episodic learners, regret harness."""
from .model import AgeFunction, ConfigError, ProblemInstance, StepOutcome
from .exact import SolveResult, solve_average_cost, solve_finite_horizon
from .learn import Algorithm, InitialStateMode, LearnerState
from .harness import ExperimentConfig, RegretTrace, run_experiment

__all__ = [
    "AgeFunction", "ConfigError", "ProblemInstance", "StepOutcome",
    "SolveResult", "solve_average_cost", "solve_finite_horizon",
    "Algorithm", "InitialStateMode", "LearnerState",
    "ExperimentConfig", "RegretTrace", "run_experiment",
]
