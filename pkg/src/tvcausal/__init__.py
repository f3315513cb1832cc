"""Time-varying linear causal models estimated by particle SAEM."""

__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .graph import determine_graph, enforce_acyclicity, markov_blanket, scad
from .model import (
    SCENARIOS,
    CausalGraph,
    GeneratorConfig,
    LatentLayout,
    LatentTrajectory,
    SemParameters,
    TimeSeriesDataset,
    generate_benchmark_instance,
    observation_loglik,
    simulate_latents,
    simulate_observations,
)
from .saem import FitConfig, FitResult, saem_fit, step_size
from .smoother import ParticleSystem, cpf_as_sweep
from .evaluation import BenchmarkReport, f1_score, rmse, run_benchmark, wilcoxon_signed_rank
from .forecast import mh_forecast, propagate_coefficients_one_step, predictive_density
from .io import load_csv, save_csv
from .oracle import detect_root, kurtosis_statistic, root_noise_variance
