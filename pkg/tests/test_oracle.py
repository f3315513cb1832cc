import numpy as np
import pytest

from tvcausal import SemParameters, detect_root, kurtosis_statistic, root_noise_variance
from tvcausal.exceptions import InvalidInputError
from tvcausal.model import simulate_latents, simulate_observations


def _chain(seed, T=20000):
    rng = np.random.default_rng(seed)
    mask = np.array([[False, False], [True, False]])
    params = SemParameters.create(2, sigma2_fixed=[0.5, 0.3], mask=mask, alpha_ar=0.7, w=0.5)
    latents = simulate_latents(params, T, rng)
    return simulate_observations(latents, params, rng)


def test_statistic_hand_example():
    x = np.arange(1.0, 41.0)
    want = np.mean((x[:-2] ** 2) * (x[2:] ** 2))
    assert kurtosis_statistic(x, 0, 2) == pytest.approx(want)
    assert kurtosis_statistic(x, 0, 0) == pytest.approx(np.mean(x**4))


def test_statistic_needs_enough_pairs():
    with pytest.raises(InvalidInputError):
        kurtosis_statistic(np.ones(40), 0, 15)
    with pytest.raises(InvalidInputError):
        kurtosis_statistic(np.ones(40), 0, -1)


def test_iid_gaussian_variance_is_recovered():
    x = np.random.default_rng(0).normal(0, np.sqrt(0.7), 200000)
    assert root_noise_variance(x, 0) == pytest.approx(0.7, rel=0.02)


@pytest.mark.parametrize("seed", range(3))
def test_root_of_a_two_variable_chain(seed):
    data = _chain(seed)
    det = detect_root(data, p_max=5)
    root, profile = det
    assert root == 0 and not det.tied
    assert profile.shape == (2, 5)
    # the child's profile falls with the lag, the root's does not
    assert det.drop_z[1] > 3 and abs(det.drop_z[0]) <= 3


def test_root_detection_input_checks():
    with pytest.raises(InvalidInputError):
        detect_root(np.ones((100, 2)), p_max=1)
    with pytest.raises(InvalidInputError):
        detect_root(np.ones((20, 2)), p_max=5)


def test_independent_noise_is_a_tie():
    X = np.random.default_rng(1).normal(size=(20000, 3))
    assert detect_root(X).tied
