"""Decentralized edge offloading as a mean-field UCB bandit game, with
projected-gradient load balancing of per-server reward scalings."""

from .analysis import (
    ConvergenceError,
    UniquenessReport,
    lipschitz_constant,
    pushforward_theta,
    steady_profile_oracle,
    uniqueness_check,
)
from .balancer import OptimizationTrace, estimate_gradient, load_balance, project_simplex
from .bandit import Agent, AgentState, Population, SimulationTrace, average_profile, simulate, step, ucb_select
from .experiment import ExperimentConfig, ExperimentReport, calibrate_dmax, export_report, run_experiment
from .reward import (
    NetworkConfig,
    sample_reward,
    sample_task_size,
    sample_type,
    spectral_efficiency,
    success_probability,
    total_delay,
    truncated_normal_cdf,
)

__version__ = "0.1.0"
