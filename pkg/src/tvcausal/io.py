"""CSV ingestion and JSON serialization of fit results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ParseError
from .model.types import CausalGraph, SemParameters, TimeSeriesDataset


def load_csv(path) -> TimeSeriesDataset:
    """Read a header row of variable names followed by one numeric row per time step."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty file", row=1)
    names = [c.strip() for c in rows[0]]
    if any(not n for n in names):
        raise ParseError("blank variable name in header", row=1, column=names.index("") + 1)
    if len(rows) < 2:
        raise ParseError("no data rows", row=2)
    m = len(names)
    values = np.empty((len(rows) - 1, m))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != m:
            raise ParseError(f"expected {m} cells, found {len(row)}", row=r, column=min(len(row), m) + 1)
        for c, cell in enumerate(row):
            text = cell.strip()
            if not text:
                raise ParseError("missing value", row=r, column=c + 1)
            try:
                values[r - 2, c] = float(text)
            except ValueError:
                raise ParseError(f"non-numeric value {text!r}", row=r, column=c + 1) from None
            if not math.isfinite(values[r - 2, c]):
                raise ParseError(f"non-finite value {text!r}", row=r, column=c + 1)
    return TimeSeriesDataset(values, names)


def save_csv(data, path) -> None:
    """Write values with ``repr`` precision so that a reload is exact."""
    if not isinstance(data, TimeSeriesDataset):
        data = TimeSeriesDataset(np.asarray(data, dtype=float))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.names)
        for row in data.values:
            writer.writerow([repr(float(v)) for v in row])


def to_jsonable(obj):
    """Recursively convert numpy containers and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def graph_to_dict(graph: CausalGraph) -> dict:
    return {
        "instantaneous": graph.instantaneous,
        "lagged": graph.lagged,
        "edge_scores": graph.edge_scores,
        "lagged_scores": graph.lagged_scores,
    }


def graph_from_dict(d: dict) -> CausalGraph:
    m = len(d["instantaneous"])
    lagged = np.asarray(d.get("lagged") or np.zeros((0, m, m)), dtype=float).reshape(-1, m, m)
    lagged_scores = np.asarray(d.get("lagged_scores") or np.zeros((0, m, m)), dtype=float).reshape(-1, m, m)
    return CausalGraph(np.asarray(d["instantaneous"]), lagged=lagged,
                       edge_scores=np.asarray(d.get("edge_scores"), dtype=float), lagged_scores=lagged_scores)


def _latent_summaries(result) -> dict:
    m = result.b_mean.shape[1]
    edges = {}
    mask = result.params.mask
    for j in range(m):
        for i in range(m):
            if mask[i, j]:
                edges[f"{j}->{i}"] = {"mean": result.b_mean[:, i, j], "var": result.b_var[:, i, j]}
    out = {"coefficients": edges}
    if result.params.varying_variance:
        out["log_variances"] = {str(i): {"mean": result.h_mean[:, i], "var": result.h_var[:, i]}
                                for i in range(m)}
    return out


def result_to_dict(result, seed=None, names=None) -> dict:
    """Self-describing document: parameters, graph, latent summaries, diagnostics and state for forecasting."""
    from . import __version__

    return to_jsonable({
        "version": __version__,
        "seed": seed,
        "names": names,
        "T": result.T,
        "config": result.config.to_dict(),
        "parameters": result.params.to_dict(),
        "graph": graph_to_dict(result.graph),
        "raw_graph": graph_to_dict(result.raw_graph),
        "latent_summaries": _latent_summaries(result),
        "diagnostics": {**result.diagnostics, "q_trace": result.q_trace},
        "forecast_state": {"windows": result.final_windows, "weights": result.final_weights},
    })


def save_result(result, path, seed=None, names=None) -> None:
    dump_json(result_to_dict(result, seed=seed, names=names), path)


def load_result(path) -> dict:
    """Load a saved fit; returns a dict with ``params``, ``graph``, ``windows``, ``weights``, ``T``."""
    try:
        doc = json.loads(Path(path).read_text())
        params = SemParameters.from_dict(doc["parameters"])
        graph = graph_from_dict(doc["graph"])
        state = doc["forecast_state"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as err:
        raise InvalidInputError(f"cannot read result file {path}: {err}") from err
    return {
        "params": params,
        "graph": graph,
        "windows": np.asarray(state["windows"], dtype=float),
        "weights": np.asarray(state["weights"], dtype=float),
        "T": int(doc["T"]),
        "document": doc,
    }
