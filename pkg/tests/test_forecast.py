import numpy as np
import pytest
from scipy.stats import norm

from tvcausal import CausalGraph, SemParameters, mh_forecast, predictive_density, propagate_coefficients_one_step
from tvcausal.exceptions import InvalidConfigError, InvalidInputError
from tvcausal.forecast import (
    _proposal_log_ratio,
    assimilate,
    direct_predictive_mean,
    forecast_path,
    mc_standard_error,
    node_terms,
    sample_predictive,
)


def _chain_setup(seed=0, J=200):
    # 0 -> 1 -> 2 with time-varying coefficients
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 0] = mask[2, 1] = True
    params = SemParameters.create(3, mask=mask, sigma2_fixed=[1.0, 0.5, 0.3], alpha_ar=0.9, w=0.05)
    params = params.copy(alpha0=np.where(mask, 0.08, 0.0))
    rng = np.random.default_rng(seed)
    windows = rng.normal(0.8, 0.2, (J, 1, 2))
    ens = propagate_coefficients_one_step(windows, params, rng)
    graph = CausalGraph.from_edges(3, [(0, 1), (1, 2)])
    return params, ens, graph, rng


def test_single_component_density_is_normal():
    got = predictive_density(0.3, [1.0, 2.0], np.array([[0.5, -0.1]]), [0.4], offset=0.2)
    assert got == pytest.approx(norm.pdf(0.3, 0.5, np.sqrt(0.4)))


def test_mixture_density_averages_components():
    coefs = np.array([[1.0], [2.0]])
    got = predictive_density(1.0, [1.0], coefs, [1.0, 4.0], weights=[0.25, 0.75])
    want = 0.25 * norm.pdf(1.0, 1.0, 1.0) + 0.75 * norm.pdf(1.0, 2.0, 2.0)
    assert got == pytest.approx(want)


def test_random_walk_proposal_is_symmetric():
    assert _proposal_log_ratio(0.3, -1.7) == 0.0


def test_propagated_ensemble_shapes():
    params, ens, _, _ = _chain_setup()
    assert ens.B.shape == (200, 3, 3) and ens.sigma2.shape == (200, 3)
    np.testing.assert_allclose(ens.sigma2[:, 2], 0.3)
    assert np.all(ens.B[:, 0, :] == 0)
    assert ens.weights.sum() == pytest.approx(1.0)


def test_node_terms_mask_non_parents():
    _, ens, _, _ = _chain_setup()
    sparse = CausalGraph(np.zeros((3, 3)))
    coefs, offset, var = node_terms(ens, 1, sparse)
    assert np.all(coefs == 0) and np.all(offset == 0)
    np.testing.assert_allclose(var, 0.5)


def test_chain_without_children_matches_direct_mean():
    _, ens, graph, rng = _chain_setup(1)
    observed = np.array([1.2, 0.4, 0.0])
    est, trace = mh_forecast(2, graph, ens, observed, N=20000, rng=rng, proposal_sd=0.8, init=0.0)
    mu, _ = direct_predictive_mean(2, graph, ens, observed)
    assert trace.shape == (20001,)
    assert abs(est - mu) < 4 * mc_standard_error(trace)


def test_chain_with_child_matches_quadrature():
    _, ens, graph, rng = _chain_setup(2)
    observed = np.array([1.2, 0.0, 1.5])
    est, trace = mh_forecast(1, graph, ens, observed, N=20000, rng=rng, proposal_sd=0.8, init=0.0)
    grid = np.linspace(-6, 6, 4001)
    own = np.array([predictive_density(y, [1.2], ens.B[:, 1, [0]], ens.sigma2[:, 1]) for y in grid])
    child = np.array([predictive_density(1.5, [y], ens.B[:, 2, [1]], ens.sigma2[:, 2]) for y in grid])
    post = own * child
    want = np.sum(grid * post) / np.sum(post)
    assert abs(est - want) < 4 * mc_standard_error(trace)


def test_direct_samples_match_direct_mean():
    _, ens, graph, rng = _chain_setup(3)
    observed = np.array([0.5, 0.0, 0.0])
    mu, sd = direct_predictive_mean(1, graph, ens, observed)
    draws = sample_predictive(1, graph, ens, observed, 40000, rng)
    assert draws.mean() == pytest.approx(mu, abs=4 * sd / np.sqrt(40000))
    assert draws.std() == pytest.approx(sd, rel=0.03)


def test_mh_rejects_short_chains_and_bad_targets():
    _, ens, graph, rng = _chain_setup()
    with pytest.raises(InvalidConfigError):
        mh_forecast(0, graph, ens, np.zeros(3), N=100, rng=rng)
    with pytest.raises(InvalidInputError):
        mh_forecast(3, graph, ens, np.zeros(3), N=200, rng=rng)


def test_assimilation_favours_states_that_explain_the_data():
    params, ens, _, rng = _chain_setup(4)
    x_new = np.array([2.0, 2.0 * 1.2, 0.0])  # x1 = b * x0 with b near 1.2
    windows = assimilate(ens, x_new, rng)
    assert windows.shape == ens.windows.shape
    before = np.average(ens.B[:, 1, 0], weights=ens.weights)
    assert abs(windows[:, 0, 0].mean() - 1.2) < abs(before - 1.2)


def test_forecast_path_returns_one_value_per_step():
    params, _, graph, rng = _chain_setup(5)
    X = rng.normal(size=(30, 3))
    windows = rng.normal(0.8, 0.2, (50, 1, 2))
    preds = forecast_path(params, graph, windows, X, 25, 5, [1, 2], rng, N=300, n_samples=50)
    assert preds.shape == (5, 2) and np.all(np.isfinite(preds))
    with pytest.raises(InvalidInputError):
        forecast_path(params, graph, windows, X, 28, 5, [1], rng)
