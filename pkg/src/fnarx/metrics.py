"""Error and summary metrics: normalized mean squared error, design averages,
peak-response error and exceedance (survival) curves."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ErrorReport",
    "nmse",
    "mean_nmse",
    "survival_curve",
    "peak_error",
    "build_report",
    "write_report_csv",
    "write_report_json",
]


def nmse(
    truth: np.ndarray, prediction: np.ndarray, gamma: float = 0.0, skip: int = 0
) -> float:
    """Mean squared residual over the evaluated span, normalized by the
    population variance of the truth on that same span plus ``gamma``.

    ``skip`` drops the initialization span from both numerator and
    denominator. Non-finite predictions yield +inf.
    """
    truth = np.asarray(truth, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    if truth.shape != prediction.shape or truth.ndim != 1:
        raise ValueError(f"shape mismatch: {truth.shape} vs {prediction.shape}")
    if not (0 <= skip < truth.shape[0]):
        raise ValueError(f"skip must be in [0, {truth.shape[0] - 1}], got {skip}")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    t = truth[skip:]
    p = prediction[skip:]
    if not np.isfinite(p).all():
        return math.inf
    denom = float(np.var(t)) + gamma
    mse = float(np.mean((t - p) ** 2))
    if denom == 0.0:
        return 0.0 if mse == 0.0 else math.inf
    return mse / denom


def mean_nmse(errors: Sequence[float]) -> float:
    """Arithmetic mean of per-trajectory errors."""
    errors = list(errors)
    if not errors:
        raise ValueError("need >= 1 error value")
    return float(np.mean(errors))


def survival_curve(values: Sequence[float], thresholds: Sequence[float]) -> np.ndarray:
    """Empirical exceedance probabilities P(value > threshold)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need >= 1 value")
    thresholds = np.asarray(thresholds, dtype=float)
    return np.array([np.mean(values > thr) for thr in thresholds])


def peak_error(truth: np.ndarray, prediction: np.ndarray, skip: int = 0) -> float:
    """Relative error of the peak absolute response over the evaluated span."""
    truth = np.asarray(truth, dtype=float)[skip:]
    prediction = np.asarray(prediction, dtype=float)[skip:]
    if truth.shape != prediction.shape:
        raise ValueError("length mismatch")
    peak_t = float(np.abs(truth).max())
    peak_p = float(np.abs(prediction).max()) if np.isfinite(prediction).all() else math.inf
    if peak_t == 0.0:
        return 0.0 if peak_p == 0.0 else math.inf
    return abs(peak_p - peak_t) / peak_t


@dataclass(frozen=True)
class ErrorReport:
    """Per-trajectory forecast errors plus their design-level mean."""

    trajectory_nmse: np.ndarray
    mean: float
    peak_truth: np.ndarray
    peak_prediction: np.ndarray
    diverged: np.ndarray  # bool per trajectory

    def __post_init__(self):
        if not math.isinf(self.mean):
            recomputed = mean_nmse(self.trajectory_nmse)
            if abs(recomputed - self.mean) > 1e-12 * max(1.0, abs(recomputed)):
                raise ValueError("mean inconsistent with per-trajectory errors")

    @property
    def n_trajectories(self) -> int:
        return self.trajectory_nmse.shape[0]

    @property
    def median(self) -> float:
        return float(np.median(self.trajectory_nmse))


def build_report(
    truths: Sequence[np.ndarray],
    predictions: Sequence[np.ndarray],
    gamma: float = 0.0,
    skip: int | Sequence[int] = 0,
) -> ErrorReport:
    """Evaluate forecasts against truths; ``skip`` is shared or per-trajectory."""
    if len(truths) != len(predictions) or not truths:
        raise ValueError("need equally many (>=1) truths and predictions")
    skips = [skip] * len(truths) if isinstance(skip, int) else list(skip)
    errors, pt, pp, div = [], [], [], []
    for t, p, s in zip(truths, predictions, skips):
        e = nmse(t, p, gamma=gamma, skip=s)
        errors.append(e)
        finite = np.isfinite(np.asarray(p, float)[s:]).all()
        div.append(not finite)
        pt.append(float(np.abs(np.asarray(t, float)[s:]).max()))
        pp.append(float(np.abs(np.asarray(p, float)[s:]).max()) if finite else math.inf)
    return ErrorReport(
        trajectory_nmse=np.asarray(errors),
        mean=mean_nmse(errors),
        peak_truth=np.asarray(pt),
        peak_prediction=np.asarray(pp),
        diverged=np.asarray(div, dtype=bool),
    )


def write_report_csv(report: ErrorReport, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trajectory", "nmse", "peak_truth", "peak_prediction", "diverged"])
        for i in range(report.n_trajectories):
            writer.writerow([
                i,
                repr(float(report.trajectory_nmse[i])),
                repr(float(report.peak_truth[i])),
                repr(float(report.peak_prediction[i])),
                int(report.diverged[i]),
            ])


def write_report_json(report: ErrorReport, path) -> None:
    finite = report.trajectory_nmse[np.isfinite(report.trajectory_nmse)]
    summary = {
        "n_trajectories": report.n_trajectories,
        "mean_nmse": report.mean if math.isfinite(report.mean) else "inf",
        "median_nmse": report.median if math.isfinite(report.median) else "inf",
        "n_diverged": int(report.diverged.sum()),
        "max_finite_nmse": float(finite.max()) if finite.size else None,
    }
    Path(path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
