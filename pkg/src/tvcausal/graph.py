"""From coefficient trajectories to a discrete causal graph."""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import InvalidHyperparameterError
from .model.types import CausalGraph, topological_order

logger = logging.getLogger(__name__)


def scad(b, lam: float, a: float = 3.7):
    """Smoothly clipped absolute deviation penalty, elementwise.

    ``lam * |b|`` up to ``lam``, a quadratic blend up to ``a * lam`` and the
    constant ``(a + 1) lam^2 / 2`` beyond.
    """
    if a <= 2:
        raise InvalidHyperparameterError(f"SCAD requires a > 2, got {a}")
    if lam < 0:
        raise InvalidHyperparameterError(f"SCAD requires lambda >= 0, got {lam}")
    absb = np.abs(np.asarray(b, dtype=float))
    linear = lam * absb
    middle = -(absb**2 - 2.0 * a * lam * absb + lam**2) / (2.0 * (a - 1.0))
    flat = np.full_like(absb, (a + 1.0) * lam**2 / 2.0)
    out = np.where(absb <= lam, linear, np.where(absb <= a * lam, middle, flat))
    return out if out.ndim else float(out)


def _threshold_rule(mean_path, threshold):
    """Per-entry time mean and population variance of a (T, ...) path."""
    bar = mean_path.mean(axis=0)
    spread = ((mean_path - bar) ** 2).mean(axis=0)
    present = ~((np.abs(bar) < threshold) & (spread < threshold))
    return present, np.maximum(np.abs(bar), spread)


def determine_graph(posterior_mean, threshold: float = 0.05, posterior_sq_dev=None,
                    lagged_mean=None) -> CausalGraph:
    """Threshold posterior coefficient paths into a graph.

    An edge ``j -> i`` is dropped when both ``|mean_t b_ij,t|`` and the time
    variance of the path fall below ``threshold``.

    Parameters
    ----------
    posterior_mean : (T, m, m) array
        Posterior mean of ``b_ij,t`` with the ``[t, i, j]`` layout.
    posterior_sq_dev : (T, m, m) array, optional
        Squared deviations of the path from its time mean. Derived from
        ``posterior_mean`` when omitted.
    lagged_mean : (s_lag, T, m, m) array, optional
        Posterior means of the lagged coefficients; same rule per lag.
    """
    bhat = np.asarray(posterior_mean, dtype=float)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if posterior_sq_dev is None:
        present, score = _threshold_rule(bhat, threshold)
    else:
        bar = np.abs(bhat.mean(axis=0))
        spread = np.asarray(posterior_sq_dev, dtype=float).mean(axis=0)
        present = ~((bar < threshold) & (spread < threshold))
        score = np.maximum(bar, spread)
    m = bhat.shape[1]
    np.fill_diagonal(present, False)
    np.fill_diagonal(score, 0.0)
    lagged = np.zeros((0, m, m), dtype=int)
    lagged_scores = np.zeros((0, m, m))
    if lagged_mean is not None and len(lagged_mean):
        lag_present, lag_score = zip(*(_threshold_rule(np.asarray(c, float), threshold) for c in lagged_mean))
        lagged = np.stack([p.T for p in lag_present]).astype(int)
        lagged_scores = np.stack([s.T for s in lag_score])
    return CausalGraph(present.T.astype(int), lagged=lagged, edge_scores=score.T,
                       lagged_scores=lagged_scores)


def _cycle_edges(adj):
    """Edges lying on at least one directed cycle (both ends in one SCC)."""
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(range(adj.shape[0]))
    g.add_edges_from(zip(*np.nonzero(adj)))
    edges = []
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1:
            edges += [(j, i) for j, i in g.subgraph(comp).edges()]
    return edges


def enforce_acyclicity(graph: CausalGraph) -> CausalGraph:
    """Remove the weakest cycle edges until the instantaneous graph is a DAG.

    Removed edges are logged and recorded on ``graph.removed_edges`` of the
    returned object.
    """
    adj = graph.instantaneous.copy()
    removed = []
    while topological_order(adj) is None:
        candidates = _cycle_edges(adj)
        j, i = min(candidates, key=lambda e: (graph.edge_scores[e], e))
        adj[j, i] = 0
        removed.append((int(j), int(i)))
    if removed:
        logger.info("removed edges to break cycles: %s", removed)
    out = CausalGraph(adj, lagged=graph.lagged.copy(), edge_scores=graph.edge_scores.copy(),
                      lagged_scores=graph.lagged_scores.copy())
    out.removed_edges = removed
    return out


def markov_blanket(graph: CausalGraph, target: int):
    """Parents, children and spouses of ``target`` as sorted lists."""
    m = graph.m
    if not 0 <= target < m:
        raise IndexError(f"target {target} out of range for {m} variables")
    parents = graph.parents(target)
    children = graph.children(target)
    spouses = sorted({p for c in children for p in graph.parents(c) if p != target})
    return parents, children, spouses
