"""Metrics, a paired signed-rank test and the synthetic benchmark driver."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .exceptions import DegenerateTestError, InvalidInputError
from .model.simulate import generate_benchmark_instance
from .model.types import CausalGraph, GeneratorConfig

logger = logging.getLogger(__name__)

EXACT_MAX_N = 20


def _adjacency(g):
    return np.asarray(g.instantaneous if isinstance(g, CausalGraph) else g).astype(bool)


def f1_score(estimated, truth):
    """Directed-edge ``(f1, precision, recall)``.

    Two empty graphs score 1. An empty estimate against a nonempty truth
    scores 0, as does any estimate without a single correct edge.
    """
    est = _adjacency(estimated)
    true = _adjacency(truth)
    if est.shape != true.shape:
        raise InvalidInputError("graphs have different sizes")
    off = ~np.eye(est.shape[0], dtype=bool)
    est, true = est & off, true & off
    n_est, n_true = int(est.sum()), int(true.sum())
    if n_est == 0 and n_true == 0:
        return 1.0, 1.0, 1.0
    tp = int((est & true).sum())
    precision = tp / n_est if n_est else 0.0
    recall = tp / n_true if n_true else 0.0
    if tp == 0:
        return 0.0, precision, recall
    return 2 * precision * recall / (precision + recall), precision, recall


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape or pred.size == 0:
        raise InvalidInputError("rmse needs two nonempty vectors of equal length")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def _midranks(values):
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_v = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_upper_tail(doubled_ranks, observed):
    """``P(W2 >= observed)`` for the doubled signed-rank statistic under the null."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    counts /= counts.sum()
    return float(counts[observed:].sum())


def wilcoxon_signed_rank(a, b, alternative: str = "greater") -> float:
    """Paired signed-rank test of ``a - b``.

    ``alternative="greater"`` tests whether ``a`` tends to exceed ``b``;
    ``"less"`` the reverse and ``"two-sided"`` either. Zero differences are
    dropped and tied magnitudes get midranks. Up to 20 nonzero pairs the null
    distribution is computed exactly; beyond that a normal approximation with
    tie and continuity corrections is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError("samples must be paired")
    if a.ndim != 1 or a.size < 5:
        raise InvalidInputError(f"need at least 5 pairs, got {a.size}")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateTestError("all paired differences are zero")
    n = d.size
    if alternative not in ("greater", "less", "two-sided"):
        raise InvalidInputError(f"unknown alternative {alternative!r}")
    ranks = _midranks(np.abs(d))
    w_plus = ranks[d > 0].sum()
    total = ranks.sum()

    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        w2 = int(round(2 * w_plus))
        upper = _exact_upper_tail(doubled, w2)
        lower = _exact_upper_tail(doubled, int(doubled.sum()) - w2)
    else:
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        sd = math.sqrt(var)
        mean = total / 2.0
        upper = float(norm.sf((w_plus - mean - 0.5) / sd))
        lower = float(norm.cdf((w_plus - mean + 0.5) / sd))
    if alternative == "greater":
        return upper
    if alternative == "less":
        return lower
    return min(1.0, 2.0 * min(upper, lower))


# -- baselines -------------------------------------------------------------

def ols_forecasts(X, T_fit: int, steps: int, include_lag: bool = False) -> np.ndarray:
    """Static least-squares forecasts of every variable from the others at the same time.

    Coefficients come from the first ``T_fit`` rows; ``include_lag`` adds the
    previous values of all variables as regressors.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[1]
    preds = np.empty((steps, m))
    start = 1 if include_lag else 0
    for i in range(m):
        others = [k for k in range(m) if k != i]

        def design(rows):
            cols = [np.ones(len(rows)), *(X[rows, k] for k in others)]
            if include_lag:
                cols += [X[rows - 1, k] for k in range(m)]
            return np.column_stack(cols)

        train = np.arange(start, T_fit)
        coef = np.linalg.lstsq(design(train), X[train, i], rcond=None)[0]
        preds[:, i] = design(np.arange(T_fit, T_fit + steps)) @ coef
    return preds


def naive_forecasts(X, T_fit: int, steps: int) -> np.ndarray:
    """Last observed value of each variable."""
    X = np.asarray(X, dtype=float)
    return X[T_fit - 1: T_fit + steps - 1].copy()


# -- benchmark -------------------------------------------------------------

@dataclass
class BenchmarkReport:
    """Per-replication records plus summaries by scenario and sample size."""

    records: list
    summary: dict
    comparisons: dict
    config: dict
    version: str = ""

    def to_dict(self) -> dict:
        return _clean({"records": self.records, "summary": self.summary, "comparisons": self.comparisons,
                       "config": self.config, "version": self.version})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample_size", "scenario", "replication", "f1", "rmse", "rmse_ols", "rmse_naive"])
        for r in self.records:
            writer.writerow([r["sample_size"], r["scenario"], r["replication"],
                             *(_fmt(r.get(k)) for k in ("f1", "rmse", "rmse_ols", "rmse_naive"))])
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    return obj


@dataclass
class _Task:
    scenario_idx: int
    scenario: str
    T: int
    rep: int
    seed: int
    generator: GeneratorConfig
    fit: object
    steps: int
    forecast: bool
    mh_samples: int
    n_forecast_samples: int = 300
    extra: dict = field(default_factory=dict)


def _run_replication(task: _Task) -> dict:
    from .forecast import forecast_path
    from .saem import saem_fit

    record = {"scenario": task.scenario, "sample_size": task.T, "replication": task.rep, "error": None}
    try:
        inst_rng = np.random.default_rng(np.random.SeedSequence(task.seed, spawn_key=(task.scenario_idx, task.rep)))
        gen = task.generator.replace(T=task.T + task.steps, scenario=task.scenario)
        data, truth, _, _ = generate_benchmark_instance(gen, rng=inst_rng)
        X = data.values
        train = data.head(task.T)
        fit_cfg = replace(task.fit, scenario=task.scenario)
        fit_rng = np.random.default_rng(
            np.random.SeedSequence(task.seed, spawn_key=(task.scenario_idx, task.rep, task.T, 1)))
        result = saem_fit(train, fit_cfg, rng=fit_rng)
        f1, precision, recall = f1_score(result.graph, truth)
        record.update(f1=f1, precision=precision, recall=recall, n_edges_true=int(truth.instantaneous.sum()),
                      n_edges_est=int(result.graph.instantaneous.sum()))
        if task.forecast and task.steps > 0:
            fc_rng = np.random.default_rng(
                np.random.SeedSequence(task.seed, spawn_key=(task.scenario_idx, task.rep, task.T, 2)))
            targets = list(range(X.shape[1]))
            preds = forecast_path(result.params, result.graph, result.final_windows, X, task.T, task.steps,
                                  targets, fc_rng, N=task.mh_samples, n_samples=task.n_forecast_samples,
                                  weights=result.final_weights)
            actual = X[task.T: task.T + task.steps]
            lagged = task.scenario == "with-lags"
            ols = ols_forecasts(X, task.T, task.steps, include_lag=lagged)
            naive = naive_forecasts(X, task.T, task.steps)
            per_var = lambda p: [rmse(p[:, i], actual[:, i]) for i in targets]  # noqa: E731
            record.update(rmse=float(np.mean(per_var(preds))), rmse_ols=float(np.mean(per_var(ols))),
                          rmse_naive=float(np.mean(per_var(naive))))
    except Exception as err:  # failures are recorded, not fatal
        logger.warning("replication %s/%s/%s failed: %s", task.scenario, task.T, task.rep, err)
        record["error"] = f"{type(err).__name__}: {err}"
    return record


def _mean_se(values):
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return None, None
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else None
    return float(v.mean()), se


def run_benchmark(generator: GeneratorConfig, fit, replications: int, sample_sizes=(500, 2000),
                  scenarios=("coef-only", "coef-and-variance"), seed: int = 0, threads: int = 1, steps: int = 10,
                  forecast: bool = True, mh_samples: int = 2000, n_forecast_samples: int = 300) -> BenchmarkReport:
    """Generate, fit, score and forecast ``replications`` instances per setting.

    Every replication of a scenario shares its graph and parameters across
    sample sizes; seeds derive from ``seed`` and the (scenario, replication,
    sample size) position only, so results do not depend on ``threads``.
    Each instance is simulated for ``T + steps`` points; the model is fitted
    on the first ``T`` and the remaining ``steps`` values of every variable
    are forecast one step ahead.
    """
    from . import __version__

    if replications < 1:
        raise InvalidInputError("need at least one replication")
    tasks = [
        _Task(si, sc, int(T), rep, seed, generator, fit, steps, forecast, mh_samples, n_forecast_samples)
        for si, sc in enumerate(scenarios) for T in sample_sizes for rep in range(replications)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_replication, tasks))
    else:
        records = [_run_replication(t) for t in tasks]

    summary = {}
    comparisons = {}
    for sc in scenarios:
        summary[sc] = {}
        for T in sample_sizes:
            rows = [r for r in records if r["scenario"] == sc and r["sample_size"] == T]
            ok = [r for r in rows if r["error"] is None]
            entry = {"n": len(ok), "failed": len(rows) - len(ok)}
            for key in ("f1", "rmse", "rmse_ols", "rmse_naive"):
                entry[f"{key}_mean"], entry[f"{key}_se"] = _mean_se(r.get(key) for r in ok)
            summary[sc][str(T)] = entry
    paired = [r for r in records if r["error"] is None and r.get("rmse") is not None]
    for base in ("rmse_ols", "rmse_naive"):
        try:
            p = wilcoxon_signed_rank([r["rmse"] for r in paired], [r[base] for r in paired], alternative="less")
            comparisons[f"mh_vs_{base[5:]}"] = {"p_value": p, "n": len(paired)}
        except (InvalidInputError, DegenerateTestError) as err:
            comparisons[f"mh_vs_{base[5:]}"] = {"p_value": None, "n": len(paired), "note": str(err)}
    config = {
        "generator": generator.__dict__ if hasattr(generator, "__dict__") else generator,
        "fit": fit.to_dict() if hasattr(fit, "to_dict") else fit,
        "replications": replications, "sample_sizes": list(sample_sizes), "scenarios": list(scenarios),
        "seed": seed, "steps": steps, "forecast": forecast, "mh_samples": mh_samples,
        "n_forecast_samples": n_forecast_samples,
    }
    return BenchmarkReport(records=records, summary=summary, comparisons=comparisons, config=_clean(config),
                           version=__version__)
