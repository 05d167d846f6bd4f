"""Contextual dynamic pricing under GLM demand, with and without local differential privacy."""

from .environments import (
    ContextDistribution,
    EnvSpec,
    RegretTrace,
    SimulationError,
    draw_context,
    instant_regret,
    make_env,
    simulate_run,
)
from .estimation import (
    ConvergenceError,
    Dataset,
    DesignMatrix,
    EstimationError,
    SingularDesignError,
    fit_mle,
    log_likelihood,
    log_likelihood_gradient,
)
from .glm import (
    Covariate,
    GlmFamily,
    ModelParams,
    PriceRange,
    optimal_price,
    psi_derivatives,
    revenue,
    sample_demand,
)
from .harness import (
    AggregateResult,
    EnvTemplate,
    ExperimentGrid,
    fit_regret_scaling,
    run_grid,
)
from .policies import POLICIES, PolicyConfig, PolicySpec, Tuning, make_policy
from .privacy import PrivacyParams, gaussian_mechanism, l2_ball, r_eps_d, truncate_gradient

__version__ = "0.1.0"

__all__ = [
    "AggregateResult", "ContextDistribution", "ConvergenceError", "Covariate", "Dataset", "DesignMatrix",
    "EnvSpec", "EnvTemplate", "EstimationError", "ExperimentGrid", "GlmFamily", "ModelParams", "POLICIES",
    "PolicyConfig", "PolicySpec", "PriceRange", "PrivacyParams", "RegretTrace", "SimulationError",
    "SingularDesignError", "Tuning", "draw_context", "fit_mle", "fit_regret_scaling", "gaussian_mechanism",
    "instant_regret", "l2_ball", "log_likelihood", "log_likelihood_gradient", "make_env", "make_policy",
    "optimal_price", "psi_derivatives", "r_eps_d", "revenue", "run_grid", "sample_demand", "simulate_run",
    "truncate_gradient",
]
