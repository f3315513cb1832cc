import numpy as np
import pytest

from tvcausal import FitConfig, GeneratorConfig, SemParameters, generate_benchmark_instance, saem_fit, step_size
from tvcausal.exceptions import InvalidConfigError
from tvcausal.model import LatentLayout, simulate_latents, simulate_observations
from tvcausal.saem import complete_data_loglik, m_step, path_statistics


def _truth_m_step(scenario, T, seed, passes=1):
    data, _, params, latents = generate_benchmark_instance(GeneratorConfig(m=4, T=T, seed=seed, scenario=scenario))
    layout = LatentLayout(params)
    Z = layout.from_trajectory(latents)
    stats = path_statistics(layout, data.values, Z[None], np.ones(1))
    new, _ = m_step(stats, params, passes=passes)
    return params, new


def test_step_size_schedule():
    cfg = FitConfig(K=20, K_burn=5, kappa=0.7)
    assert [step_size(k, cfg) for k in (1, 5)] == [1.0, 1.0]
    assert step_size(6, cfg) == 1.0
    assert step_size(7, cfg) == pytest.approx(2 ** -0.7)
    with pytest.raises(ValueError):
        step_size(0, cfg)


@pytest.mark.parametrize("changes", [
    {"M": 1}, {"K": 0}, {"kappa": 0.5}, {"kappa": 1.2}, {"scenario": "bogus"},
    {"scad_a": 2.0}, {"threshold": 0.0}, {"blocking": "edge"}, {"n_average": 0},
])
def test_invalid_fit_configs(changes):
    with pytest.raises(InvalidConfigError):
        FitConfig(**changes)


def test_burn_in_defaults_to_half():
    assert FitConfig(K=40).K_burn == 20


@pytest.mark.parametrize("scenario", ["coef-only", "coef-and-variance", "with-lags"])
def test_m_step_recovers_parameters_from_true_latents(scenario):
    params, new = _truth_m_step(scenario, 3000, seed=4)
    on = params.mask
    assert np.max(np.abs(new.alpha - params.alpha)[:, on], initial=0) < 0.05
    assert np.max(np.abs(new.w[on] / params.w[on] - 1), initial=0) < 0.35
    if params.varying_variance:
        assert np.max(np.abs(new.beta - params.beta)) < 0.05
        assert np.max(np.abs(new.v / params.v - 1)) < 0.35
    else:
        assert np.max(np.abs(new.sigma2_fixed / params.sigma2_fixed - 1)) < 0.2


def test_converged_coordinate_update_is_least_squares():
    # one coefficient path, fixed noise: enough Gauss-Seidel passes give the OLS fit of b_t on (1, b_{t-1})
    rng = np.random.default_rng(0)
    mask = np.array([[False, False], [True, False]])
    params = SemParameters.create(2, mask=mask, sigma2_fixed=[1.0, 1.0], alpha_ar=0.8, w=0.1)
    params = params.copy(alpha0=np.array([[0.0, 0.0], [0.3, 0.0]]))
    latents = simulate_latents(params, 4000, rng)
    X = simulate_observations(latents, params, rng).values
    layout = LatentLayout(params)
    stats = path_statistics(layout, X, layout.from_trajectory(latents)[None], np.ones(1))
    new, _ = m_step(stats, params, passes=300)
    b = latents.B[:, 1, 0]
    design = np.column_stack([np.ones(b.size - 1), b[:-1]])
    (c0, c1), *_ = np.linalg.lstsq(design, b[1:], rcond=None)
    assert new.alpha0[1, 0] == pytest.approx(c0, abs=5e-3)
    assert new.alpha[0, 1, 0] == pytest.approx(c1, abs=5e-3)


def test_statistics_blend_endpoints():
    params, _ = _truth_m_step("coef-only", 200, seed=1)
    layout = LatentLayout(params)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 4))
    a = path_statistics(layout, X, rng.normal(size=(3, 200, layout.d)), np.full(3, 1 / 3))
    b = path_statistics(layout, X, rng.normal(size=(3, 200, layout.d)), np.full(3, 1 / 3))
    whole = a.blend(b, 1.0)
    kept = a.blend(b, 0.0)
    for name in a.gram:
        np.testing.assert_allclose(whole.gram[name], b.gram[name])
        np.testing.assert_allclose(kept.gram[name], a.gram[name])
    np.testing.assert_allclose(a.blend(b, 0.25).resid_sq, 0.75 * a.resid_sq + 0.25 * b.resid_sq)


def test_complete_data_loglik_prefers_true_parameters():
    data, _, params, latents = generate_benchmark_instance(GeneratorConfig(m=3, T=500, seed=2,
                                                                            scenario="coef-and-variance"))
    layout = LatentLayout(params)
    Z = layout.from_trajectory(latents)[None]
    good = complete_data_loglik(layout, data.values, Z, np.ones(1))
    worse = params.copy(v=params.v * 20)
    bad = complete_data_loglik(LatentLayout(worse), data.values, Z, np.ones(1))
    assert good > bad


@pytest.fixture(scope="module")
def small_fit():
    data, truth, _, _ = generate_benchmark_instance(GeneratorConfig(m=3, T=150, seed=5,
                                                                     scenario="coef-and-variance"))
    cfg = FitConfig(M=8, K=12, n_average=4, seed=3, scad_enabled=True, scad_lambda=0.1)
    return data, cfg, saem_fit(data, cfg)


def test_fit_outputs_are_consistent(small_fit):
    data, cfg, res = small_fit
    T, m = data.values.shape
    assert res.b_mean.shape == (T, m, m) and res.h_mean.shape == (T, m)
    assert np.all(res.b_var >= 0) and np.all(res.h_var >= 0)
    assert res.q_trace.shape == (cfg.K,) and np.all(np.isfinite(res.q_trace))
    assert res.graph.is_acyclic()
    assert np.all(res.graph.instantaneous <= res.raw_graph.instantaneous)
    assert res.final_windows.shape[0] == res.final_weights.shape[0]
    assert res.final_weights.sum() == pytest.approx(1.0)
    for key in ("ancestor_fallbacks", "clamped", "iterations", "removed_edges"):
        assert key in res.diagnostics


def test_fit_is_deterministic_given_seed(small_fit):
    data, cfg, res = small_fit
    again = saem_fit(data, cfg)
    np.testing.assert_array_equal(res.b_mean, again.b_mean)
    np.testing.assert_array_equal(res.q_trace, again.q_trace)


def test_fixed_parameters_are_left_untouched():
    rng = np.random.default_rng(0)
    mask = np.array([[False, False], [True, False]])
    params = SemParameters.create(2, mask=mask, sigma2_fixed=[1.0, 0.3], alpha_ar=0.9, w=0.05)
    latents = simulate_latents(params, 80, rng)
    data = simulate_observations(latents, params, rng)
    res = saem_fit(data, FitConfig(M=10, K=6, n_average=3, scenario="coef-only", mask=mask,
                                   update_params=False), init_params=params)
    np.testing.assert_array_equal(res.params.alpha, params.alpha)
    np.testing.assert_array_equal(res.params.sigma2_fixed, params.sigma2_fixed)


def test_callback_sees_every_iteration():
    data, _, _, _ = generate_benchmark_instance(GeneratorConfig(m=2, T=60, seed=1))
    seen = []
    saem_fit(data, FitConfig(M=4, K=5, n_average=2, scenario="coef-only"), callback=lambda k, p, s: seen.append(k))
    assert seen == [1, 2, 3, 4, 5]


def _single_path_stats(b):
    mask = np.array([[False, False], [True, False]])
    params = SemParameters.create(2, mask=mask, sigma2_fixed=[1.0, 1.0], alpha_ar=0.9, w=0.05)
    layout = LatentLayout(params)
    X = np.ones((len(b), 2))
    return params, path_statistics(layout, X, np.asarray(b, float)[None, :, None], np.ones(1))


def test_hand_ar_example():
    from tvcausal.saem import m_step_alpha, m_step_w

    params, stats = _single_path_stats([1.0, 0.5, 0.25, 0.125])
    alpha0, alpha = m_step_alpha(stats, params)
    # the 1e-8 relative ridge on the denominator shifts the exact answer slightly
    assert alpha[0, 1, 0] == pytest.approx(0.5, abs=1e-6)
    assert alpha0[1, 0] == pytest.approx(0.0, abs=1e-6)
    fitted = params.copy(alpha0=alpha0, alpha=alpha)
    assert m_step_w(stats, fitted)[1, 0] == pytest.approx(0.0, abs=1e-10)


def test_constant_path_is_a_fixed_point():
    from tvcausal.saem import m_step_alpha

    c = 0.7
    params, stats = _single_path_stats(np.full(50, c))
    alpha0, alpha = m_step_alpha(stats, params)
    assert alpha0[1, 0] + alpha[0, 1, 0] * c == pytest.approx(c, abs=1e-6)


def test_step_size_with_unit_exponent_and_bounded_squares():
    assert step_size(14, FitConfig(K=20, K_burn=10, kappa=1.0)) == pytest.approx(0.25)
    cfg = FitConfig(K=5000, K_burn=0, kappa=0.7)
    partial = sum(step_size(k, cfg) ** 2 for k in range(1, 5001))
    assert partial < 3.5  # zeta(1.4) is about 3.1055


def test_q_trace_trends_upward_on_a_benchmark_instance():
    data, _, _, _ = generate_benchmark_instance(GeneratorConfig(m=4, T=300, seed=8, scenario="coef-and-variance"))
    res = saem_fit(data, FitConfig(M=10, K=40, seed=1))
    assert res.q_trace[-10:].mean() >= res.q_trace[:10].mean()
