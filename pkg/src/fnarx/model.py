"""End-to-end functional autoregressive surrogate.

Fitting stacks the training design into window blocks, optionally subsamples
rows, fits one feature transform per channel, evaluates monomial regressors
and runs the least-angle path. Every ``eval_stride``-th path iteration (plus
the final one) is re-fit by least squares and scored by the mean closed-loop
forecast error over the training design; the iteration minimizing that error
defines the model. Prediction comes in two modes: one-step-ahead, which reads
true past outputs, and closed-loop forecast, which feeds its own predictions
back through a rolling buffer.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._kernels import project_rows
from .basis import MultiIndexSet, evaluate_regressors, generate_multi_indices
from .features import (
    IdentityTransform,
    PcaTransform,
    Transform,
    apply_all,
    fit_identity,
    fit_pca,
)
from .metrics import mean_nmse, nmse
from .regression import SparseCoefficients, hybrid_refit, lars_path
from .timeseries import ExperimentalDesign, Trajectory
from .windowing import LagSpec, MemoryConfig, stack_design_subsampled

__all__ = [
    "TransformSpec",
    "ModelConfig",
    "FittedModel",
    "ForecastResult",
    "classical_config",
    "fit",
    "predict_osa",
    "forecast",
    "adaptive_search",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

MODEL_SCHEMA = "fnarx-model/1"
_DEFAULT_VARIANCE_TARGET = 0.95


@dataclass(frozen=True)
class TransformSpec:
    """How to turn one channel's windows into features.

    kind "pca" uses either a variance target or a fixed component count
    (both unset means the 0.95 default target); kind "identity" passes the
    lags through raw (all window lags when ``lags`` is None).
    """

    kind: str = "pca"
    variance_target: float | None = None
    n_components: int | None = None
    lags: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("pca", "identity"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.variance_target is not None and self.n_components is not None:
            raise ValueError("set at most one of variance_target, n_components")
        if self.variance_target is not None and not (0.0 < self.variance_target <= 1.0):
            raise ValueError(f"variance_target must be in (0, 1], got {self.variance_target}")
        if self.lags is not None:
            object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))


@dataclass(frozen=True)
class ModelConfig:
    """Everything that defines a fit: memory, features, basis and solver knobs.

    ``gamma=None`` resolves to 1e-8 times the mean output variance over the
    training design. ``transform`` is a single spec for all channels or a
    mapping from channel name to spec.
    """

    memory: MemoryConfig
    transform: Union[TransformSpec, Mapping[str, TransformSpec]] = field(
        default_factory=TransformSpec
    )
    degree: int = 1
    interaction_order: int = 1
    q_norm: float = 1.0
    max_iterations: int = 200
    eval_stride: int = 10
    max_rows: int = 120_000
    gamma: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.degree < 1 or self.interaction_order < 1:
            raise ValueError("degree and interaction_order must be >= 1")
        if not (0.0 < self.q_norm <= 1.0):
            raise ValueError(f"q_norm must be in (0, 1], got {self.q_norm}")
        if self.max_iterations < 1 or self.eval_stride < 1 or self.max_rows < 1:
            raise ValueError("max_iterations, eval_stride and max_rows must be >= 1")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def transform_for(self, channel: str) -> TransformSpec:
        if isinstance(self.transform, TransformSpec):
            return self.transform
        try:
            return self.transform[channel]
        except KeyError:
            raise KeyError(
                f"no transform spec for channel {channel!r}; configured: "
                f"{sorted(self.transform)}"
            ) from None


def classical_config(
    exogenous_names,
    exogenous_order: int,
    output_order: int,
    dt: float,
    output_name: str = "y",
    **kwargs,
) -> ModelConfig:
    """Classical raw-lag autoregressive configuration: identity transforms on
    dense lags 0..exogenous_order and 1..output_order."""
    lag_spec = LagSpec.classical(exogenous_names, exogenous_order, output_order)
    transform = {
        name: TransformSpec(kind="identity", lags=lags)
        for name, lags in lag_spec.exogenous.items()
    }
    transform[output_name] = TransformSpec(kind="identity", lags=lag_spec.output)
    return ModelConfig(memory=lag_spec.memory_config(dt), transform=transform, **kwargs)


@dataclass(frozen=True)
class ForecastResult:
    """Closed-loop prediction aligned to the trajectory grid.

    The first ``init_steps`` entries are the initialization values, not
    predictions. ``diverged_at`` is the first non-finite step, if any;
    entries from there on hold zeros. ``nmse_value`` is filled when the
    trajectory carried a true output (gamma=0, initialization span excluded).
    """

    series: np.ndarray
    init_steps: int
    diverged_at: int | None = None
    nmse_value: float | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


@dataclass(frozen=True)
class FittedModel:
    """Fitted transforms, basis, sparse coefficients and fit provenance."""

    config: ModelConfig
    dt: float
    channel_order: tuple[str, ...]  # exogenous..., output last
    output_channel: str
    memory_steps: Mapping[str, int]
    transforms: Mapping[str, Transform]
    indices: MultiIndexSet
    coefficients: SparseCoefficients
    chosen_iteration: int
    metadata: Mapping[str, Any]

    @property
    def init_steps(self) -> int:
        return max(self.memory_steps.values())

    @property
    def exogenous_names(self) -> tuple[str, ...]:
        return tuple(ch for ch in self.channel_order if ch != self.output_channel)

    @property
    def mean_forecast_error(self) -> float:
        return self.metadata["mean_forecast_error"]

    def forecast(self, traj: Trajectory, init=None) -> ForecastResult:
        return forecast(self, traj, init=init)

    def predict_osa(self, traj: Trajectory) -> np.ndarray:
        return predict_osa(self, traj)


# ---------------------------------------------------------------------------
# Closed-loop engine


class _Engine:
    """Per-model state prepared once and reused across forecast runs."""

    def __init__(self, model_parts):
        (self.channel_order, self.output_channel, self.memory_steps,
         self.transforms, indices, coefficients) = model_parts
        self.exo_names = [c for c in self.channel_order if c != self.output_channel]
        self.max_nt = max(self.memory_steps.values())
        self.out_nt = self.memory_steps[self.output_channel]

        widths = {}
        start = 0
        for ch in self.channel_order:
            widths[ch] = (start, start + self.transforms[ch].output_dim)
            start += self.transforms[ch].output_dim
        self.feature_ranges = widths
        self.n_features = start

        active = np.asarray(coefficients.active, dtype=np.intp)
        self.plan = indices.subset(active).plan()
        self.active_coefficients = np.ascontiguousarray(coefficients.values[active])

        out_t = self.transforms[self.output_channel]
        if isinstance(out_t, IdentityTransform):
            # output window is most-recent-first: lag L sits at column L-1
            self.out_identity_cols = np.asarray(out_t.columns, dtype=np.intp)
            self.out_pca = None
        else:
            self.out_identity_cols = None
            self.out_pca = out_t

    def exogenous_features(self, traj: Trajectory) -> np.ndarray:
        """Feature columns of all exogenous channels for rows t0..N-1,
        computed in one vectorized pass (they never depend on predictions)."""
        n_rows = traj.n_steps - self.max_nt
        out = np.empty((n_rows, self.n_features))
        for ch in self.exo_names:
            n_t = self.memory_steps[ch]
            x = traj.exogenous[ch]
            view = sliding_window_view(x, n_t + 1)[self.max_nt - n_t:, ::-1]
            lo, hi = self.feature_ranges[ch]
            t = self.transforms[ch]
            if isinstance(t, IdentityTransform):
                out[:, lo:hi] = view[:, np.asarray(t.columns, dtype=np.intp)]
            else:
                Z = np.ascontiguousarray((view - t.mean) / t.std)
                block = np.empty((n_rows, t.n_retained))
                project_rows(Z, t.components, block)
                out[:, lo:hi] = block
        return out

    def run(
        self,
        traj: Trajectory,
        init: np.ndarray,
        feedback: bool,
        exo_features: np.ndarray | None = None,
    ) -> tuple[np.ndarray, int | None]:
        """March the per-step loop; with ``feedback`` the output buffer holds
        predictions, otherwise the trajectory's true outputs (one-step-ahead).
        Returns (series, first non-finite step or None)."""
        N = traj.n_steps
        t0 = self.max_nt
        if exo_features is None:
            exo_features = self.exogenous_features(traj)

        if feedback:
            buf = np.zeros(N)
            buf[:t0] = init
            series = buf
        else:
            buf = np.asarray(traj.output, dtype=float)
            series = buf.copy()

        xi = np.empty(self.n_features)
        lo, hi = self.feature_ranges[self.output_channel]
        out_t = self.transforms[self.output_channel]
        vals = np.empty(self.plan.n_terms)
        pow_buf = self.plan.new_pow_buf()
        coef = self.active_coefficients
        out_nt = self.out_nt
        diverged_at = None

        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(t0, N):
                xi[:lo] = exo_features[k - t0, :lo]
                xi[hi:] = exo_features[k - t0, hi:]
                window = buf[k - out_nt:k][::-1]
                if self.out_identity_cols is not None:
                    xi[lo:hi] = window[self.out_identity_cols]
                else:
                    z = np.ascontiguousarray((window - out_t.mean) / out_t.std)
                    project_rows(z[None, :], out_t.components, xi[None, lo:hi])
                self.plan.evaluate_into(xi, vals, pow_buf)
                y_hat = float(np.dot(vals, coef))
                if not math.isfinite(y_hat):
                    diverged_at = k
                    break
                if feedback:
                    buf[k] = y_hat
                else:
                    series[k] = y_hat
        if diverged_at is not None and feedback:
            series[diverged_at:] = 0.0
        return series, diverged_at


def _engine_for(model: FittedModel) -> _Engine:
    engine = model.__dict__.get("_engine")
    if engine is None:
        engine = _Engine((
            model.channel_order,
            model.output_channel,
            model.memory_steps,
            model.transforms,
            model.indices,
            model.coefficients,
        ))
        object.__setattr__(model, "_engine", engine)
    return engine


def _check_compatible(model: FittedModel, traj: Trajectory) -> None:
    if abs(traj.dt - model.dt) > 1e-9 * model.dt:
        raise ValueError(
            f"trajectory dt {traj.dt} does not match the model's fit rate {model.dt}"
        )
    missing = [c for c in model.exogenous_names if c not in traj.exogenous]
    if missing:
        raise ValueError(f"trajectory is missing exogenous channels {missing}")
    if traj.n_steps <= model.init_steps:
        raise ValueError(
            f"trajectory too short: {traj.n_steps} steps <= memory {model.init_steps}"
        )


def _resolve_init(model: FittedModel, traj: Trajectory, init) -> np.ndarray:
    t0 = model.init_steps
    if init is None:
        return np.zeros(t0)
    if isinstance(init, str):
        if init != "truth":
            raise ValueError(f"init must be None, 'truth' or an array, got {init!r}")
        if traj.output is None:
            raise ValueError("init='truth' needs a trajectory with outputs")
        return np.asarray(traj.output[:t0], dtype=float)
    init = np.asarray(init, dtype=float)
    if init.shape != (t0,):
        raise ValueError(f"init must have shape ({t0},), got {init.shape}")
    return init


def forecast(model: FittedModel, traj: Trajectory, init=None) -> ForecastResult:
    """Closed-loop prediction over the whole trajectory.

    ``init`` seeds the first max-memory output values: None for zeros,
    "truth" to copy the recorded output, or an explicit array.
    """
    _check_compatible(model, traj)
    engine = _engine_for(model)
    series, diverged_at = engine.run(traj, _resolve_init(model, traj, init), feedback=True)
    t0 = model.init_steps
    value = None
    if traj.output is not None:
        value = math.inf if diverged_at is not None else nmse(
            traj.output, series, gamma=0.0, skip=t0
        )
    return ForecastResult(
        series=series, init_steps=t0, diverged_at=diverged_at, nmse_value=value
    )


def predict_osa(model: FittedModel, traj: Trajectory) -> np.ndarray:
    """One-step-ahead predictions using true past outputs; the first
    max-memory entries are copied from the recorded output."""
    _check_compatible(model, traj)
    if traj.output is None:
        raise ValueError("one-step-ahead prediction needs a trajectory with outputs")
    engine = _engine_for(model)
    series, _ = engine.run(traj, init=np.empty(0), feedback=False)
    return series


# ---------------------------------------------------------------------------
# Fitting


def _fit_transforms(config: ModelConfig, info) -> dict[str, Transform]:
    transforms: dict[str, Transform] = {}
    for ch in info.channel_order:
        spec = config.transform_for(ch)
        if spec.kind == "identity":
            transforms[ch] = fit_identity(info.block_lags[ch], ch, spec.lags)
        else:
            target, count = spec.variance_target, spec.n_components
            if target is None and count is None:
                target = _DEFAULT_VARIANCE_TARGET
            transforms[ch] = fit_pca(
                info.blocks[ch], ch, variance_target=target, n_components=count
            )
    return transforms


def _resolve_gamma(config: ModelConfig, design: ExperimentalDesign) -> float:
    if config.gamma is not None:
        return config.gamma
    return 1e-8 * float(np.mean([np.var(t.output) for t in design]))


def fit(design: ExperimentalDesign, config: ModelConfig) -> FittedModel:
    """Fit the surrogate on a training design; see the module docstring for
    the pipeline. Divergent forecasts during path evaluation are not errors:
    they score +inf and lose the argmin."""
    for i, traj in enumerate(design):
        if traj.output is None:
            raise ValueError(f"trajectory {i} has no output channel")

    # equivalent to subsampling the fully stacked design matrix, minus the
    # memory for rows that are dropped anyway
    sub = stack_design_subsampled(design, config.memory, config.max_rows, config.seed)
    n_rows_total = sum(
        t.n_steps - max(config.memory.steps_for(ch, t.dt)
                        for ch in (*t.exogenous_names, t.output_name))
        for t in design
    )
    transforms = _fit_transforms(config, sub)
    feats = apply_all(transforms, sub)
    n_features = feats.width
    indices = generate_multi_indices(
        n_features,
        config.degree,
        min(config.interaction_order, n_features),
        config.q_norm,
    )
    psi = evaluate_regressors(indices, feats)
    path = lars_path(psi, sub.targets, config.max_iterations)
    gamma = _resolve_gamma(config, design)
    mem_steps = {ch: config.memory.steps_for(ch, design.dt) for ch in sub.channel_order}

    base_metadata = {
        "schema": MODEL_SCHEMA,
        "seed": config.seed,
        "gamma": gamma,
        "n_rows_total": n_rows_total,
        "n_rows_used": sub.n_rows,
        "standardization_rows": "subsampled" if sub.n_rows < n_rows_total else "all",
        "n_features": n_features,
        "n_regressors": len(indices),
        "path_length": len(path),
        "degenerate_path": path.degenerate_stop,
    }

    def build(coefficients, chosen, metadata) -> FittedModel:
        return FittedModel(
            config=config,
            dt=design.dt,
            channel_order=sub.channel_order,
            output_channel=sub.output_channel,
            memory_steps=mem_steps,
            transforms=transforms,
            indices=indices,
            coefficients=coefficients,
            chosen_iteration=chosen,
            metadata=metadata,
        )

    if len(path) == 0:
        # constant targets: intercept-only model
        values = np.zeros(len(indices))
        values[0] = float(np.mean(sub.targets))
        coefficients = SparseCoefficients(values=values, active=(0,))
        model = build(coefficients, 0, dict(base_metadata))
        err = _design_forecast_error(model, design, gamma)
        meta = dict(base_metadata, eval_errors=[[0, err]], mean_forecast_error=err)
        return build(coefficients, 0, meta)

    eval_iters = sorted(
        set(range(config.eval_stride, len(path) + 1, config.eval_stride)) | {len(path)}
    )
    candidates: list[SparseCoefficients] = []
    errors: list[float] = []
    exo_cache: list[np.ndarray] | None = None
    for k in eval_iters:
        coefficients = hybrid_refit(path, psi, sub.targets, k)
        model = build(coefficients, k, dict(base_metadata))
        engine = _engine_for(model)
        if exo_cache is None:
            exo_cache = [engine.exogenous_features(t) for t in design]
        errs = []
        for traj, exo in zip(design, exo_cache):
            series, diverged_at = engine.run(
                traj, np.zeros(model.init_steps), feedback=True, exo_features=exo
            )
            if diverged_at is not None:
                errs.append(math.inf)
            else:
                errs.append(nmse(traj.output, series, gamma=gamma, skip=model.init_steps))
        candidates.append(coefficients)
        errors.append(mean_nmse(errs))

    best = int(np.argmin(errors))  # ties resolve to the earliest (sparsest) iteration
    metadata = dict(
        base_metadata,
        eval_errors=[[k, e] for k, e in zip(eval_iters, errors)],
        mean_forecast_error=errors[best],
    )
    return build(candidates[best], eval_iters[best], metadata)


def _design_forecast_error(model: FittedModel, design: ExperimentalDesign, gamma: float) -> float:
    engine = _engine_for(model)
    errs = []
    for traj in design:
        series, diverged_at = engine.run(traj, np.zeros(model.init_steps), feedback=True)
        if diverged_at is not None:
            errs.append(math.inf)
        else:
            errs.append(nmse(traj.output, series, gamma=gamma, skip=model.init_steps))
    return mean_nmse(errs)


# ---------------------------------------------------------------------------
# Basis-adaptive configuration search


def adaptive_search(
    design: ExperimentalDesign,
    config: ModelConfig,
    degrees=(1, 2, 3),
    interaction_orders=(1, 2, 3),
    q_norms=(0.7, 0.85, 1.0),
    variance_targets=None,
    memories=None,
) -> tuple[FittedModel, list[dict]]:
    """Fit every configuration on the grid and keep the one with the lowest
    mean training-forecast error; ties break toward fewer active coefficients,
    then lower degree. Failed configurations are recorded and skipped.

    ``variance_targets`` and ``memories`` (window seconds) optionally extend
    the grid; transforms are re-fit per candidate.
    """
    nu_axis = list(variance_targets) if variance_targets is not None else [None]
    mem_axis = list(memories) if memories is not None else [None]
    report: list[dict] = []
    best_model: FittedModel | None = None
    best_key: tuple | None = None

    for d, r, q, nu, T in itertools.product(
        degrees, interaction_orders, q_norms, nu_axis, mem_axis
    ):
        candidate = replace(config, degree=d, interaction_order=r, q_norm=q)
        if nu is not None:
            candidate = replace(candidate, transform=_with_variance(candidate.transform, nu))
        if T is not None:
            candidate = replace(
                candidate,
                memory=MemoryConfig(window_seconds=T, per_channel=config.memory.per_channel),
            )
        entry = {"degree": d, "interaction_order": r, "q_norm": q}
        if nu is not None:
            entry["variance_target"] = nu
        if T is not None:
            entry["memory_seconds"] = T
        try:
            model = fit(design, candidate)
        except Exception as err:  # failed configurations are reported, not fatal
            entry["error"] = None
            entry["failure"] = f"{type(err).__name__}: {err}"
            report.append(entry)
            continue
        error = model.mean_forecast_error
        entry["error"] = error
        entry["n_active"] = model.coefficients.n_active
        entry["chosen_iteration"] = model.chosen_iteration
        report.append(entry)
        key = (error, model.coefficients.n_active, d)
        if best_key is None or key < best_key:
            best_key = key
            best_model = model

    if best_model is None:
        raise RuntimeError("every configuration in the adaptive search failed")
    return best_model, report


def _with_variance(transform, nu: float):
    def adjust(spec: TransformSpec) -> TransformSpec:
        if spec.kind != "pca":
            return spec
        return replace(spec, variance_target=nu, n_components=None)

    if isinstance(transform, TransformSpec):
        return adjust(transform)
    return {ch: adjust(spec) for ch, spec in transform.items()}


# ---------------------------------------------------------------------------
# Serialization


def _transform_to_dict(t: Transform) -> dict:
    if isinstance(t, IdentityTransform):
        return {
            "kind": "identity",
            "channel": t.channel,
            "lags": list(t.lags),
            "columns": list(t.columns),
        }
    return {
        "kind": "pca",
        "channel": t.channel,
        "mean": t.mean.tolist(),
        "std": t.std.tolist(),
        "eigenvalues": t.eigenvalues.tolist(),
        "components": t.components.tolist(),
        "n_retained": t.n_retained,
        "explained_variance": t.explained_variance,
        "zero_variance_columns": list(t.zero_variance_columns),
    }


def _transform_from_dict(d: Mapping) -> Transform:
    if d["kind"] == "identity":
        return IdentityTransform(
            channel=d["channel"], lags=tuple(d["lags"]), columns=tuple(d["columns"])
        )
    return PcaTransform(
        channel=d["channel"],
        mean=np.asarray(d["mean"], dtype=float),
        std=np.asarray(d["std"], dtype=float),
        eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
        components=np.ascontiguousarray(d["components"], dtype=float),
        n_retained=int(d["n_retained"]),
        explained_variance=float(d["explained_variance"]),
        zero_variance_columns=tuple(d["zero_variance_columns"]),
    )


def _spec_to_dict(spec: TransformSpec) -> dict:
    return {
        "kind": spec.kind,
        "variance_target": spec.variance_target,
        "n_components": spec.n_components,
        "lags": list(spec.lags) if spec.lags is not None else None,
    }


def _spec_from_dict(d: Mapping) -> TransformSpec:
    return TransformSpec(
        kind=d["kind"],
        variance_target=d["variance_target"],
        n_components=d["n_components"],
        lags=tuple(d["lags"]) if d["lags"] is not None else None,
    )


def _config_to_dict(config: ModelConfig) -> dict:
    if isinstance(config.transform, TransformSpec):
        transform = {"scope": "all", "spec": _spec_to_dict(config.transform)}
    else:
        transform = {
            "scope": "per_channel",
            "specs": {ch: _spec_to_dict(s) for ch, s in config.transform.items()},
        }
    return {
        "memory": {
            "window_seconds": config.memory.window_seconds,
            "per_channel": dict(config.memory.per_channel),
        },
        "transform": transform,
        "degree": config.degree,
        "interaction_order": config.interaction_order,
        "q_norm": config.q_norm,
        "max_iterations": config.max_iterations,
        "eval_stride": config.eval_stride,
        "max_rows": config.max_rows,
        "gamma": config.gamma,
        "seed": config.seed,
    }


def _config_from_dict(d: Mapping) -> ModelConfig:
    t = d["transform"]
    if t["scope"] == "all":
        transform = _spec_from_dict(t["spec"])
    else:
        transform = {ch: _spec_from_dict(s) for ch, s in t["specs"].items()}
    return ModelConfig(
        memory=MemoryConfig(
            window_seconds=d["memory"]["window_seconds"],
            per_channel=d["memory"]["per_channel"],
        ),
        transform=transform,
        degree=int(d["degree"]),
        interaction_order=int(d["interaction_order"]),
        q_norm=float(d["q_norm"]),
        max_iterations=int(d["max_iterations"]),
        eval_stride=int(d["eval_stride"]),
        max_rows=int(d["max_rows"]),
        gamma=d["gamma"],
        seed=int(d["seed"]),
    )


def model_to_dict(model: FittedModel) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "dt": model.dt,
        "channel_order": list(model.channel_order),
        "output_channel": model.output_channel,
        "memory_steps": dict(model.memory_steps),
        "config": _config_to_dict(model.config),
        "transforms": {ch: _transform_to_dict(t) for ch, t in model.transforms.items()},
        "indices": {
            "dimension": model.indices.dimension,
            "degree": model.indices.degree,
            "interaction_order": model.indices.interaction_order,
            "q_norm": model.indices.q_norm,
            "exponents": model.indices.exponents.tolist(),
        },
        "coefficients": {
            "n_terms": int(model.coefficients.values.shape[0]),
            "active": list(model.coefficients.active),
            "active_values": [float(model.coefficients.values[i]) for i in model.coefficients.active],
            "rank_deficient": model.coefficients.rank_deficient,
        },
        "chosen_iteration": model.chosen_iteration,
        "metadata": dict(model.metadata),
    }


def model_from_dict(d: Mapping) -> FittedModel:
    """Rebuild a model from its serialized form; unknown keys are ignored for
    forward compatibility."""
    if d.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema {d.get('schema')!r}")
    coeffs = d["coefficients"]
    values = np.zeros(int(coeffs["n_terms"]))
    active = tuple(int(i) for i in coeffs["active"])
    for i, v in zip(active, coeffs["active_values"]):
        values[i] = float(v)
    idx = d["indices"]
    return FittedModel(
        config=_config_from_dict(d["config"]),
        dt=float(d["dt"]),
        channel_order=tuple(d["channel_order"]),
        output_channel=d["output_channel"],
        memory_steps={ch: int(v) for ch, v in d["memory_steps"].items()},
        transforms={ch: _transform_from_dict(t) for ch, t in d["transforms"].items()},
        indices=MultiIndexSet(
            dimension=int(idx["dimension"]),
            degree=int(idx["degree"]),
            interaction_order=int(idx["interaction_order"]),
            q_norm=float(idx["q_norm"]),
            exponents=np.asarray(idx["exponents"], dtype=np.int64),
        ),
        coefficients=SparseCoefficients(
            values=values, active=active, rank_deficient=bool(coeffs["rank_deficient"])
        ),
        chosen_iteration=int(d["chosen_iteration"]),
        metadata=dict(d["metadata"]),
    )


def save_model(model: FittedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> FittedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
