"""Time-varying linear causal model: types, simulation and likelihoods."""

from .layout import LatentLayout, stationary_prior
from .likelihood import ar_stationary_moments, batch_loglik, node_residuals, observation_loglik, path_loglik
from .simulate import (
    generate_benchmark_instance,
    lag_contributions,
    simulate_latents,
    simulate_observations,
    simulate_state_path,
)
from .types import (
    SCENARIOS,
    CausalGraph,
    GeneratorConfig,
    LatentTrajectory,
    SemParameters,
    TimeSeriesDataset,
    topological_order,
    validate_acyclic,
)
