"""Command-line interface: ``simulate``, ``fit``, ``forecast``, ``oracle-root`` and ``benchmark``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import InvalidConfigError, TVCausalError
from .io import dump_json, graph_to_dict, load_csv, load_result, save_csv, save_result
from .model.types import GeneratorConfig

logger = logging.getLogger("tvcausal")


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise InvalidConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise InvalidConfigError("config must be a JSON object")
    unknown = set(doc) - {"generator", "fit", "benchmark"}
    if unknown:
        raise InvalidConfigError(f"unknown config sections: {sorted(unknown)}")
    return doc


def _build(cls, values: dict, overrides: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    merged = {**values, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = set(merged) - names
    if unknown:
        raise InvalidConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for key, val in merged.items():
        if isinstance(val, list) and key.endswith("_range"):
            merged[key] = tuple(val)
    return cls(**merged)


def _generator_config(args, cfg) -> GeneratorConfig:
    return _build(GeneratorConfig, cfg.get("generator", {}),
                  {"seed": args.seed, "scenario": getattr(args, "scenario", None), "T": getattr(args, "T", None)})


def _fit_config(args, cfg):
    from .saem import FitConfig

    fit = _build(FitConfig, cfg.get("fit", {}), {
        "seed": args.seed,
        "M": args.particles,
        "K": args.iterations,
        "threshold": args.threshold,
        "scenario": args.scenario,
    })
    if args.scad_lambda is not None:
        fit = dataclasses.replace(fit, scad_enabled=args.scad_lambda > 0, scad_lambda=args.scad_lambda)
    fit.validate()
    return fit


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    from .model.simulate import generate_benchmark_instance

    cfg = _read_config(args.config)
    gen = _generator_config(args, cfg)
    data, graph, params, _ = generate_benchmark_instance(gen)
    save_csv(data, args.out)
    if args.truth:
        dump_json({"version": __version__, "seed": gen.seed, "config": dataclasses.asdict(gen),
                   "graph": graph_to_dict(graph), "parameters": params.to_dict()}, args.truth)
    return 0


def cmd_fit(args) -> int:
    from .saem import saem_fit

    cfg = _read_config(args.config)
    fit = _fit_config(args, cfg)
    data = load_csv(args.data)
    result = saem_fit(data, fit)
    save_result(result, args.out, seed=fit.seed, names=data.names)
    logger.info("edges: %s", sorted(result.graph.edges()))
    return 0


def cmd_forecast(args) -> int:
    from .forecast import forecast_path

    model = load_result(args.model)
    data = load_csv(args.data)
    T_fit = model["T"]
    steps = args.steps if args.steps is not None else data.T - T_fit
    if steps < 1 or data.T < T_fit + steps:
        raise InvalidConfigError(f"data has {data.T} rows; need more than the {T_fit} used for fitting")
    target = data.index(int(args.target) if args.target.lstrip("-").isdigit() else args.target)
    rng = np.random.default_rng(args.seed)
    preds = forecast_path(model["params"], model["graph"], model["windows"], data.values, T_fit, steps, [target],
                          rng, N=args.mh_samples, weights=model["weights"])
    _emit("".join(f"{p!r}\n" for p in preds[:, 0].tolist()), args.out)
    return 0


def cmd_oracle_root(args) -> int:
    from .oracle import detect_root, root_noise_variance

    data = load_csv(args.data)
    det = detect_root(data, p_max=args.p_max)
    doc = {
        "version": __version__,
        "root": det.root,
        "root_name": data.names[det.root],
        "candidates": det.candidates,
        "tied": det.tied,
        "noise_variance": root_noise_variance(data, det.root),
        "profile": det.profile,
        "scores": det.scores,
        "drop_z": det.drop_z,
        "p_max": args.p_max,
    }
    _emit(dump_json(doc), args.out)
    return 0


def cmd_benchmark(args) -> int:
    from .evaluation import run_benchmark

    cfg = _read_config(args.config)
    gen = _generator_config(args, cfg)
    fit = _fit_config(args, cfg)
    bench = cfg.get("benchmark", {})
    scenarios = [args.scenario] if args.scenario else bench.get("scenarios", ["coef-only", "coef-and-variance"])
    report = run_benchmark(
        gen, fit,
        replications=args.replications or bench.get("replications", 1),
        sample_sizes=args.sample_sizes or bench.get("sample_sizes", [500]),
        scenarios=scenarios,
        seed=args.seed if args.seed is not None else bench.get("seed", 0),
        threads=args.threads,
        steps=bench.get("steps", 10),
        forecast=not args.no_forecast and bench.get("forecast", True),
        mh_samples=args.mh_samples,
    )
    _emit(report.to_json(), args.out)
    if args.table:
        Path(args.table).write_text(report.to_csv())
    return 0


def _fit_flags(p):
    p.add_argument("--particles", type=int, default=None, help="particles per sweep (default 15)")
    p.add_argument("--iterations", type=int, default=None, help="SAEM iterations")
    p.add_argument("--threshold", type=float, default=None, help="edge threshold on |posterior mean| (default 0.05)")
    p.add_argument("--scad-lambda", type=float, default=None, help="SCAD strength; 0 disables the penalty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvcausal", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a benchmark instance to CSV")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario")
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="also write the true graph and parameters as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the model to a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; a single fit is sequential")
    _fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="one-step forecasts past the fitted range")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV extending the fitted series")
    p.add_argument("--target", required=True, help="variable index or name")
    p.add_argument("--steps", type=int)
    p.add_argument("--mh-samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("oracle-root", help="detect the root variable of a chain")
    p.add_argument("--data", required=True)
    p.add_argument("--p-max", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle_root)

    p = sub.add_parser("benchmark", help="run the synthetic benchmark")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--replications", type=int)
    p.add_argument("--sample-sizes", type=int, nargs="+")
    p.add_argument("--mh-samples", type=int, default=2000)
    p.add_argument("--no-forecast", action="store_true")
    p.add_argument("--out")
    p.add_argument("--table", help="also write the flat per-replication table as CSV")
    _fit_flags(p)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TVCausalError, OSError, ValueError) as err:
        print(f"tvcausal {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
