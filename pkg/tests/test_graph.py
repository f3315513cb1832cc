import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvcausal import CausalGraph, determine_graph, enforce_acyclicity, markov_blanket, scad
from tvcausal.exceptions import InvalidHyperparameterError
from tvcausal.model import validate_acyclic


def test_scad_branch_values():
    lam, a = 0.5, 3.7
    assert scad(0.3, lam, a) == pytest.approx(0.15, abs=1e-12)
    # middle branch: -(1 - 2*3.7*0.5*1 + 0.25) / (2*2.7)
    assert scad(1.0, lam, a) == pytest.approx(2.45 / 5.4, abs=1e-12)
    assert scad(5.0, lam, a) == pytest.approx(4.7 * 0.25 / 2, abs=1e-12)
    assert scad(-5.0, lam, a) == scad(5.0, lam, a)


@pytest.mark.parametrize("lam,a", [(0.5, 3.7), (0.1, 2.5), (2.0, 10.0)])
def test_scad_is_continuous_at_both_knots(lam, a):
    for knot in (lam, a * lam):
        left = scad(knot, lam, a)
        right = scad(np.nextafter(knot, np.inf), lam, a)
        assert abs(left - right) < 1e-12


def test_scad_vectorised_and_zero_lambda():
    vals = scad(np.array([-1.0, 0.0, 2.0]), 0.0)
    np.testing.assert_array_equal(vals, 0.0)
    with pytest.raises(InvalidHyperparameterError):
        scad(1.0, 0.5, a=2.0)
    with pytest.raises(InvalidHyperparameterError):
        scad(1.0, -0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 5), st.floats(2.1, 8), st.floats(-20, 20))
def test_scad_is_bounded_and_nondecreasing_in_magnitude(lam, a, b):
    cap = (a + 1) * lam**2 / 2
    v = scad(b, lam, a)
    assert 0 <= v <= cap + 1e-12
    assert scad(abs(b) + 0.01, lam, a) >= v - 1e-12


def _const_path(T, values):
    return np.broadcast_to(np.asarray(values, float), (T,) + np.shape(values)).copy()


def test_threshold_drops_only_small_and_flat_paths():
    T = 50
    mean = _const_path(T, np.zeros((3, 3)))
    mean[:, 1, 0] = 0.3  # x0 -> x1, large mean
    mean[:, 2, 1] = 0.5 * np.sin(np.linspace(0, 6 * np.pi, T))  # x1 -> x2, zero mean but varying
    mean[:, 0, 2] = 0.01  # small and flat
    g = determine_graph(mean, threshold=0.05)
    assert g.edges() == {(0, 1), (1, 2)}


def test_enforce_acyclicity_removes_weakest_cycle_edge():
    adj = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    scores = np.array([[0, 0.9, 0], [0, 0, 0.8], [0.1, 0, 0]])
    g = enforce_acyclicity(CausalGraph(adj, edge_scores=scores))
    assert g.edges() == {(0, 1), (1, 2)}
    assert g.removed_edges == [(2, 0)]


def test_enforce_acyclicity_leaves_dags_unchanged():
    adj = np.array([[0, 1, 1], [0, 0, 1], [0, 0, 0]])
    g = enforce_acyclicity(CausalGraph(adj))
    np.testing.assert_array_equal(g.instantaneous, adj)
    assert g.removed_edges == []


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_enforce_acyclicity_returns_acyclic_subgraph(m, seed):
    rng = np.random.default_rng(seed)
    adj = (rng.random((m, m)) < 0.5).astype(int)
    np.fill_diagonal(adj, 0)
    g = enforce_acyclicity(CausalGraph(adj, edge_scores=rng.random((m, m))))
    assert validate_acyclic(g.instantaneous)
    assert np.all(g.instantaneous <= adj)


def test_markov_blanket_parents_children_spouses():
    g = CausalGraph.from_edges(5, [(0, 2), (1, 2), (2, 3), (4, 3)])
    assert markov_blanket(g, 2) == ([0, 1], [3], [4])
    assert markov_blanket(g, 4) == ([], [3], [2])
    with pytest.raises(IndexError):
        markov_blanket(g, 5)
