import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import wilcoxon_enumeration, wilcoxon_point_mass
from tvcausal import CausalGraph, GeneratorConfig, f1_score, rmse, run_benchmark, wilcoxon_signed_rank
from tvcausal.evaluation import naive_forecasts, ols_forecasts
from tvcausal.exceptions import DegenerateTestError, InvalidInputError
from tvcausal.saem import FitConfig


def test_f1_hand_example():
    truth = CausalGraph.from_edges(3, [(0, 1), (1, 2)])
    est = CausalGraph.from_edges(3, [(0, 1), (0, 2)])
    f1, precision, recall = f1_score(est, truth)
    assert (precision, recall) == (0.5, 0.5)
    assert f1 == pytest.approx(0.5)


def test_f1_edge_cases():
    empty = CausalGraph(np.zeros((3, 3)))
    full = CausalGraph.from_edges(3, [(0, 1)])
    assert f1_score(empty, empty) == (1.0, 1.0, 1.0)
    assert f1_score(empty, full)[0] == 0.0
    assert f1_score(full, full)[0] == 1.0
    reversed_edge = CausalGraph.from_edges(3, [(1, 0)])
    assert f1_score(reversed_edge, full)[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_f1_bounded_and_invariant_to_relabelling(m, seed):
    rng = np.random.default_rng(seed)
    a = (rng.random((m, m)) < 0.4).astype(int)
    b = (rng.random((m, m)) < 0.4).astype(int)
    np.fill_diagonal(a, 0)
    np.fill_diagonal(b, 0)
    perm = rng.permutation(m)
    f = f1_score(a, b)[0]
    assert 0.0 <= f <= 1.0
    assert f1_score(a[np.ix_(perm, perm)], b[np.ix_(perm, perm)])[0] == pytest.approx(f)


def test_rmse_hand_examples():
    assert rmse([1, 2], [0, 0]) == pytest.approx(np.sqrt(2.5))
    assert rmse([3.0], [1.5]) == 1.5
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    with pytest.raises(InvalidInputError):
        rmse([1, 2], [1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.integers(0, 10**6))
def test_rmse_nonnegative_and_zero_only_on_equality(values, seed):
    a = np.array(values)
    rng = np.random.default_rng(seed)
    b = a + rng.normal(size=a.size)
    assert rmse(a, a) == 0.0
    assert rmse(a, b) > 0.0


def test_wilcoxon_all_positive_six():
    a = np.array([1.0, 2.0, 3.5, 4.0, 5.2, 6.1])
    p = wilcoxon_signed_rank(a, np.zeros(6), alternative="greater")
    assert p == pytest.approx(1 / 64, abs=1e-15)
    assert wilcoxon_enumeration(a) == pytest.approx(1 / 64, abs=1e-15)


def test_wilcoxon_degenerate_and_too_short():
    with pytest.raises(DegenerateTestError):
        wilcoxon_signed_rank(np.ones(6), np.ones(6))
    with pytest.raises(InvalidInputError):
        wilcoxon_signed_rank(np.arange(4.0), np.zeros(4))


@settings(max_examples=80, deadline=None)
@given(st.integers(5, 12), st.integers(0, 10**6), st.booleans())
def test_wilcoxon_exact_matches_enumeration(n, seed, ties):
    rng = np.random.default_rng(seed)
    d = rng.normal(0.3, 1, n)
    if ties:
        d = np.round(d * 2) / 2
    if not np.any(d != 0):
        return
    for alt in ("greater", "less"):
        got = wilcoxon_signed_rank(d, np.zeros(n), alternative=alt)
        assert got == pytest.approx(wilcoxon_enumeration(d, alt), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 12), st.integers(0, 10**6))
def test_wilcoxon_swap_identity(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=n)
    p = wilcoxon_signed_rank(a, b)
    swapped = wilcoxon_signed_rank(b, a)
    assert swapped == pytest.approx(1 - p + wilcoxon_point_mass(a - b), abs=1e-12)


def test_wilcoxon_normal_approximation_is_close_to_exact_boundary():
    rng = np.random.default_rng(5)
    d = rng.normal(0.2, 1, 20)
    exact = wilcoxon_signed_rank(d, np.zeros(20))
    # 21 pairs uses the normal approximation; adding a tiny difference barely moves the statistic
    approx = wilcoxon_signed_rank(np.append(d, 1e-6), np.zeros(21))
    assert abs(exact - approx) < 0.05


def test_baselines_on_exact_linear_data():
    rng = np.random.default_rng(6)
    x0 = rng.normal(size=40)
    X = np.column_stack([x0, 2.0 * x0 + 1.0])
    preds = ols_forecasts(X, 30, 10)
    np.testing.assert_allclose(preds[:, 1], X[30:, 1], atol=1e-9)
    np.testing.assert_array_equal(naive_forecasts(X, 30, 10), X[29:39])


def _tiny_benchmark(**kw):
    return run_benchmark(GeneratorConfig(m=3), FitConfig(M=6, K=4, n_average=2), replications=1,
                         sample_sizes=(120,), scenarios=("coef-only",), mh_samples=150, **kw)


def test_benchmark_report_shape_and_determinism():
    rep = _tiny_benchmark(seed=3)
    assert len(rep.records) == 1
    rec = rep.records[0]
    assert rec["error"] is None
    assert 0.0 <= rec["f1"] <= 1.0 and rec["rmse"] > 0
    assert rep.to_json() == _tiny_benchmark(seed=3).to_json()
    doc = json.loads(rep.to_json())
    assert doc["summary"]["coef-only"]["120"]["n"] == 1
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("sample_size,scenario,replication,f1,rmse")
    assert len(lines) == 2


def test_benchmark_records_failures_without_raising():
    rep = run_benchmark(GeneratorConfig(m=3), FitConfig(M=6, K=4, n_average=2), replications=1,
                        sample_sizes=(120,), scenarios=("no-such-scenario",), forecast=False)
    assert rep.records[0]["error"] is not None
    assert rep.summary["no-such-scenario"]["120"]["failed"] == 1
