"""Command-line pipeline: simulate case studies, fit surrogates, forecast,
evaluate, and sweep configuration axes.

A JSON config file is the single source of truth for each command; flags
override leaf keys only (``--set a.b.c=value``). Unknown config keys are
rejected with their dotted location. Every run writes a resolved-config
snapshot next to its outputs. Exit code 0 means every requested output was
written; on failure a machine-readable error JSON goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .model import (
    FittedModel,
    ModelConfig,
    TransformSpec,
    fit as fit_model,
    forecast,
    load_model,
    save_model,
)
from .simulate import (
    ExcitationParams,
    OscillatorParams,
    ShearBuildingParams,
    generate_excitation,
    simulate_building,
    simulate_oscillator,
)
from .timeseries import (
    ExperimentalDesign,
    SamplingGrid,
    Trajectory,
    load_design,
    resample,
    write_design,
)
from .windowing import MemoryConfig

__all__ = ["main"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config schemas: nested dicts of allowed keys; leaves are type tuples.
# "*" allows arbitrary keys (per-channel maps); None means "any JSON value".

_NUM = (int, float)
_GRID = {"dt": _NUM, "duration": _NUM, "t_start": _NUM}
_EXCITATION = {
    "kind": (str,),
    "corner_hz": _NUM,
    "scale": _NUM,
    "intensity_cov": _NUM,
    "harmonic_hz": _NUM,
    "noise_fraction": _NUM,
}
_TRANSFORM_SPEC = {
    "kind": (str,),
    "variance_target": _NUM,
    "n_components": (int,),
    "lags": (list,),
}
_MODEL = {
    "memory_seconds": _NUM,
    "memory_per_channel": {"*": _NUM},
    "transform": dict(_TRANSFORM_SPEC, per_channel={"*": _TRANSFORM_SPEC}),
    "degree": (int,),
    "interaction_order": (int,),
    "q_norm": _NUM,
}
_FIT = {
    "max_iterations": (int,),
    "eval_stride": (int,),
    "max_rows": (int,),
    "gamma": _NUM,
}
_DATA = {"manifest": (str,), "n_use": (int,), "select_seed": (int,)}

_SCHEMAS = {
    "simulate": {
        "case": (str,),
        "n_realizations": (int,),
        "grid": _GRID,
        "building": {
            "n_stories": (int,),
            "mass_per_story": _NUM,
            "stiffness_per_story": _NUM,
            "damping_ratio": _NUM,
            "output_story": (int,),
        },
        "oscillator": {
            "mass": _NUM,
            "stiffness": _NUM,
            "cubic_stiffness": _NUM,
            "damping": _NUM,
            "saturation": _NUM,
            "include_integrals": (bool,),
        },
        "excitation": _EXCITATION,
        "seed": (int,),
    },
    "fit": {"data": _DATA, "model": _MODEL, "fit": _FIT, "seed": (int,)},
    "predict": {"model": (str,), "data": _DATA, "init": (str,)},
    "evaluate": {
        "model": (str,),
        "data": _DATA,
        "gamma": _NUM,
        "init": (str,),
        "survival_thresholds": (int,),
    },
    "sweep": {
        "axis": {"name": (str,), "values": (list,)},
        "train": _DATA,
        "validation": _DATA,
        "model": _MODEL,
        "fit": _FIT,
        "seed": (int,),
    },
}


def _validate(config, schema, location="") -> None:
    if not isinstance(config, dict):
        raise ConfigError(f"config{location or ''} must be an object")
    for key, value in config.items():
        here = f"{location}.{key}" if location else key
        if key in schema:
            expected = schema[key]
        elif "*" in schema:
            expected = schema["*"]
        else:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(expected, dict):
            _validate(value, expected, here)
        elif expected is not None and value is not None:
            if expected == _NUM:
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            else:
                ok = isinstance(value, expected)
            if not ok:
                names = "/".join(t.__name__ for t in expected)
                raise ConfigError(f"config key {here!r} must be {names}, got {value!r}")


def _apply_override(config: dict, dotted: str, raw: str) -> None:
    *parents, leaf = dotted.split(".")
    node = config
    for part in parents:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} crosses a non-object at {part!r}")
    if isinstance(node.get(leaf), dict):
        raise ConfigError(f"override {dotted!r} targets an object; only leaf keys may be overridden")
    try:
        node[leaf] = json.loads(raw)
    except json.JSONDecodeError:
        node[leaf] = raw


# ---------------------------------------------------------------------------
# Config -> domain objects


def _grid_from_config(cfg: dict) -> SamplingGrid:
    dt = float(cfg.get("dt", 0.025))
    duration = float(cfg.get("duration", 60.0))
    n_steps = int(round(duration / dt)) + 1
    return SamplingGrid(dt=dt, n_steps=n_steps, t_start=float(cfg.get("t_start", 0.0)))


def _transform_from_config(cfg: dict):
    def one(d: dict) -> TransformSpec:
        return TransformSpec(
            kind=d.get("kind", "pca"),
            variance_target=d.get("variance_target"),
            n_components=d.get("n_components"),
            lags=tuple(d["lags"]) if d.get("lags") is not None else None,
        )

    if "per_channel" in cfg:
        return {ch: one(d) for ch, d in cfg["per_channel"].items()}
    return one(cfg)


def _model_config(config: dict, seed: int) -> ModelConfig:
    m = config.get("model", {})
    f = config.get("fit", {})
    memory = MemoryConfig(
        window_seconds=float(m.get("memory_seconds", 1.0)),
        per_channel=m.get("memory_per_channel", {}),
    )
    return ModelConfig(
        memory=memory,
        transform=_transform_from_config(m.get("transform", {})),
        degree=int(m.get("degree", 1)),
        interaction_order=int(m.get("interaction_order", 1)),
        q_norm=float(m.get("q_norm", 1.0)),
        max_iterations=int(f.get("max_iterations", 200)),
        eval_stride=int(f.get("eval_stride", 10)),
        max_rows=int(f.get("max_rows", 120_000)),
        gamma=f.get("gamma"),
        seed=seed,
    )


def _load_data(cfg: dict, seed: int) -> ExperimentalDesign:
    if "manifest" not in cfg:
        raise ConfigError("data.manifest is required")
    design = load_design(cfg["manifest"])
    n_use = cfg.get("n_use")
    if n_use is not None:
        n_use = int(n_use)
        if not (1 <= n_use <= len(design)):
            raise ConfigError(f"data.n_use must be in [1, {len(design)}], got {n_use}")
        select_seed = int(cfg.get("select_seed", seed))
        perm = np.random.default_rng(select_seed).permutation(len(design))
        design = ExperimentalDesign(tuple(design[i] for i in perm[:n_use]))
    return design


# ---------------------------------------------------------------------------
# Worker helpers (module-level so they pickle for --threads)

_WORKER_MODEL: FittedModel | None = None


def _worker_load_model(path: str) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = load_model(path)


def _worker_forecast(args):
    traj, init = args
    return forecast(_WORKER_MODEL, traj, init=init)


def _forecast_all(model_path: str, design, init, threads: int):
    if threads > 1:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_worker_load_model, initargs=(model_path,)
        ) as pool:
            return list(pool.map(_worker_forecast, [(t, init) for t in design]))
    model = load_model(model_path)
    return [forecast(model, t, init=init) for t in design]


# ---------------------------------------------------------------------------
# Commands


def _write_snapshot(config: dict, out_dir: Path, seed: int, threads: int) -> None:
    snapshot = dict(config, seed=seed)
    snapshot["_run"] = {"threads": threads, "out": str(out_dir)}
    (out_dir / "resolved_config.json").write_text(
        json.dumps(snapshot, indent=2) + "\n", encoding="utf-8"
    )


def _simulate_one(args) -> Trajectory:
    config, grid, seed = args
    case = config.get("case", "building")
    exc_cfg = dict(config.get("excitation", {}))
    exc_cfg["seed"] = seed
    if case == "building":
        params = ShearBuildingParams(**config.get("building", {}))
        excitation = ExcitationParams(**exc_cfg)
        forces = generate_excitation(excitation, grid, params.n_stories)
        return simulate_building(params, forces, grid)
    if case == "oscillator":
        osc_cfg = dict(config.get("oscillator", {}))
        include = bool(osc_cfg.pop("include_integrals", False))
        params = OscillatorParams(**osc_cfg)
        excitation = ExcitationParams(**exc_cfg)
        force = generate_excitation(excitation, grid, 1)[:, 0]
        return simulate_oscillator(params, force, grid, include_integrals=include)
    raise ConfigError(f"unknown case {case!r}; expected 'building' or 'oscillator'")


def cmd_simulate(config: dict, out_dir: Path, seed: int, threads: int) -> list[Path]:
    grid = _grid_from_config(config.get("grid", {}))
    n = int(config.get("n_realizations", 1))
    seeds = [seed + i for i in range(n)]
    jobs = [(config, grid, s) for s in seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(_simulate_one, jobs))
    else:
        trajectories = [_simulate_one(j) for j in jobs]
    design = ExperimentalDesign(tuple(trajectories))
    manifest = write_design(design, out_dir)
    _write_snapshot(config, out_dir, seed, threads)
    return [manifest]


def cmd_fit(config: dict, out_dir: Path, seed: int, threads: int) -> list[Path]:
    design = _load_data(config.get("data", {}), seed)
    model_config = _model_config(config, seed)
    model = fit_model(design, model_config)
    model_path = out_dir / "model.json"
    save_model(model, model_path)
    report = {
        "chosen_iteration": model.chosen_iteration,
        "mean_forecast_error": model.mean_forecast_error,
        "n_active_coefficients": model.coefficients.n_active,
        "eval_errors": model.metadata["eval_errors"],
        "n_features": model.metadata["n_features"],
        "n_regressors": model.metadata["n_regressors"],
        "gamma": model.metadata["gamma"],
        "n_training_trajectories": len(design),
    }
    report_path = out_dir / "fit_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _write_snapshot(config, out_dir, seed, threads)
    return [model_path, report_path]


def _write_forecast_csv(path: Path, traj: Trajectory, series: np.ndarray) -> None:
    times = traj.grid.times
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t", "y_pred"] + (["y_true"] if traj.output is not None else [])
        writer.writerow(header)
        for i in range(traj.n_steps):
            row = [repr(float(times[i])), repr(float(series[i]))]
            if traj.output is not None:
                row.append(repr(float(traj.output[i])))
            writer.writerow(row)


def cmd_predict(config: dict, out_dir: Path, seed: int, threads: int) -> list[Path]:
    if "model" not in config:
        raise ConfigError("predict requires a 'model' path")
    design = _load_data(config.get("data", {}), seed)
    init = None if config.get("init", "zeros") == "zeros" else config["init"]
    results = _forecast_all(config["model"], design, init, threads)
    written = []
    for i, (traj, result) in enumerate(zip(design, results)):
        path = out_dir / f"forecast_{i:04d}.csv"
        _write_forecast_csv(path, traj, result.series)
        written.append(path)
    _write_snapshot(config, out_dir, seed, threads)
    return written


def cmd_evaluate(config: dict, out_dir: Path, seed: int, threads: int) -> list[Path]:
    if "model" not in config:
        raise ConfigError("evaluate requires a 'model' path")
    design = _load_data(config.get("data", {}), seed)
    for i, traj in enumerate(design):
        if traj.output is None:
            raise ConfigError(f"evaluation data trajectory {i} has no output channel")
    init = None if config.get("init", "zeros") == "zeros" else config["init"]
    results = _forecast_all(config["model"], design, init, threads)
    skip = results[0].init_steps
    report = metrics_mod.build_report(
        [t.output for t in design],
        [r.series for r in results],
        gamma=float(config.get("gamma", 0.0)),
        skip=skip,
    )
    csv_path = out_dir / "evaluation.csv"
    json_path = out_dir / "evaluation.json"
    metrics_mod.write_report_csv(report, csv_path)
    metrics_mod.write_report_json(report, json_path)

    n_thr = int(config.get("survival_thresholds", 50))
    top = float(max(report.peak_truth.max(), report.peak_prediction[np.isfinite(report.peak_prediction)].max(initial=0.0)))
    thresholds = np.linspace(0.0, 1.05 * top, n_thr) if top > 0 else np.array([0.0])
    surv_truth = metrics_mod.survival_curve(report.peak_truth, thresholds)
    finite_pred = np.where(np.isfinite(report.peak_prediction), report.peak_prediction, np.inf)
    surv_pred = metrics_mod.survival_curve(finite_pred, thresholds)
    surv_path = out_dir / "survival.csv"
    with surv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "exceedance_truth", "exceedance_prediction"])
        for thr, st, sp in zip(thresholds, surv_truth, surv_pred):
            writer.writerow([repr(float(thr)), repr(float(st)), repr(float(sp))])
    _write_snapshot(config, out_dir, seed, threads)
    return [csv_path, json_path, surv_path]


_SWEEP_AXES = ("n_ed", "variance_target", "memory_seconds", "dt")


def _resample_design(design: ExperimentalDesign, new_dt: float) -> ExperimentalDesign:
    return ExperimentalDesign(tuple(resample(t, new_dt) for t in design))


def cmd_sweep(config: dict, out_dir: Path, seed: int, threads: int) -> list[Path]:
    axis = config.get("axis", {})
    name = axis.get("name")
    values = axis.get("values")
    if name not in _SWEEP_AXES:
        raise ConfigError(f"axis.name must be one of {_SWEEP_AXES}, got {name!r}")
    if not values:
        raise ConfigError("axis.values must be a nonempty list")
    train_full = _load_data(config.get("train", {}), seed)
    validation_full = _load_data(config.get("validation", {}), seed)

    rows = []
    for value in values:
        train, validation = train_full, validation_full
        model_config = _model_config(config, seed)
        if name == "n_ed":
            n = int(value)
            if not (1 <= n <= len(train_full)):
                raise ConfigError(f"n_ed value {n} out of range [1, {len(train_full)}]")
            train = ExperimentalDesign(train_full.trajectories[:n])
        elif name == "variance_target":
            cfg = dict(config)
            model = dict(cfg.get("model", {}))
            transform = dict(model.get("transform", {}))
            transform["variance_target"] = float(value)
            transform.pop("n_components", None)
            model["transform"] = transform
            cfg["model"] = model
            model_config = _model_config(cfg, seed)
        elif name == "memory_seconds":
            cfg = dict(config)
            model = dict(cfg.get("model", {}))
            model["memory_seconds"] = float(value)
            cfg["model"] = model
            model_config = _model_config(cfg, seed)
        elif name == "dt":
            train = _resample_design(train_full, float(value))
            validation = _resample_design(validation_full, float(value))

        model = fit_model(train, model_config)
        errors = []
        for traj in validation:
            result = forecast(model, traj)
            errors.append(result.nmse_value if result.nmse_value is not None else math.inf)
        errors = np.asarray(errors)
        rows.append({
            "axis": name,
            "value": value,
            "median_nmse": float(np.median(errors)),
            "mean_nmse": float(np.mean(errors)),
            "n_active": model.coefficients.n_active,
            "chosen_iteration": model.chosen_iteration,
            "train_size": len(train),
        })

    csv_path = out_dir / "sweep.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    json_path = out_dir / "sweep.json"
    json_path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    _write_snapshot(config, out_dir, seed, threads)
    return [csv_path, json_path]


# ---------------------------------------------------------------------------
# Entry point

_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fnarx",
        description="Functional autoregressive surrogate modeling pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config leaf (dotted path, JSON value)",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for override in args.set:
            if "=" not in override:
                raise ConfigError(f"--set expects KEY=VALUE, got {override!r}")
            dotted, raw = override.split("=", 1)
            _apply_override(config, dotted, raw)
        _validate(config, _SCHEMAS[args.command])
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = _COMMANDS[args.command](config, out_dir, seed, max(args.threads, 1))
    except ConfigError as err:
        print(json.dumps({"error": {"type": "config", "message": str(err)}}), file=sys.stderr)
        return 2
    except Exception as err:
        print(
            json.dumps({"error": {"type": type(err).__name__, "message": str(err)}}),
            file=sys.stderr,
        )
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
