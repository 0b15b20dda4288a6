"""Per-channel feature maps from window blocks to compact feature vectors.

The principal-component transform standardizes a window block column-wise,
eigendecomposes its covariance and keeps the leading eigenvectors — either a
fixed count or the smallest count reaching a target explained-variance
fraction. The identity transform passes selected raw lags through unchanged,
which turns the pipeline into a classical lag-based autoregressive model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from ._kernels import project_rows
from .windowing import InformationMatrix

__all__ = [
    "PcaTransform",
    "IdentityTransform",
    "FeatureMatrix",
    "fit_pca",
    "fit_identity",
    "apply_transform",
    "apply_single",
    "apply_all",
    "explained_variance_curve",
]

_ZERO_VAR_RTOL = 1e-12


@dataclass(frozen=True)
class PcaTransform:
    """Fitted standardize-and-project map for one channel's window block.

    ``eigenvalues`` holds the full descending spectrum of the standardized
    covariance; ``components`` only the ``n_retained`` leading eigenvectors
    (columns). ``zero_variance_columns`` flags dead window columns whose
    standard deviation was replaced by 1.
    """

    channel: str
    mean: np.ndarray
    std: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray  # (n, n_retained)
    n_retained: int
    explained_variance: float
    zero_variance_columns: tuple[int, ...] = ()

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.n_retained


@dataclass(frozen=True)
class IdentityTransform:
    """Pass-through of selected lag columns, unstandardized.

    ``columns`` are the window-block column indices of ``lags``, resolved
    against the block layout at fit time.
    """

    channel: str
    lags: tuple[int, ...]
    columns: tuple[int, ...]

    @property
    def output_dim(self) -> int:
        return len(self.lags)


Transform = Union[PcaTransform, IdentityTransform]


@dataclass(frozen=True)
class FeatureMatrix:
    """Concatenated per-channel feature blocks, row-aligned with the source
    information matrix."""

    values: np.ndarray  # (n_rows, total_width)
    channel_order: tuple[str, ...]
    ranges: Mapping[str, tuple[int, int]]  # channel -> (start, stop) column span

    @property
    def width(self) -> int:
        return self.values.shape[1]


def fit_pca(
    block: np.ndarray,
    channel: str = "",
    variance_target: float | None = None,
    n_components: int | None = None,
) -> PcaTransform:
    """Fit the PCA map on a training window block (rows = samples).

    Exactly one truncation rule applies: ``variance_target`` keeps the smallest
    component count whose cumulative eigenvalue fraction reaches the target;
    ``n_components`` keeps a fixed count. Eigenvector signs are fixed so each
    component's largest-magnitude entry is positive.
    """
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[0] < 2:
        raise ValueError(f"block must be 2-D with >= 2 rows, got shape {block.shape}")
    if (variance_target is None) == (n_components is None):
        raise ValueError("specify exactly one of variance_target, n_components")
    n_rows, n = block.shape
    if variance_target is not None and not (0.0 < variance_target <= 1.0):
        raise ValueError(f"variance_target must be in (0, 1], got {variance_target}")
    if n_components is not None and not (1 <= n_components <= n):
        raise ValueError(f"n_components must be in [1, {n}], got {n_components}")

    mean = block.mean(axis=0)
    std = block.std(axis=0, ddof=1)
    dead = np.nonzero(std <= _ZERO_VAR_RTOL * np.maximum(1.0, np.abs(mean)))[0]
    if dead.size:
        std = std.copy()
        std[dead] = 1.0
    Z = (block - mean) / std
    C = (Z.T @ Z) / (n_rows - 1)
    C = 0.5 * (C + C.T)
    evals, vecs = np.linalg.eigh(C)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    vecs = vecs[:, order]
    for j in range(n):
        pivot = np.argmax(np.abs(vecs[:, j]))
        if vecs[pivot, j] < 0:
            vecs[:, j] = -vecs[:, j]

    total = evals.sum()
    if total <= 0.0:
        # fully degenerate block (all columns constant): keep one trivial axis
        n_keep = 1
        achieved = 1.0
    elif n_components is not None:
        n_keep = n_components
        achieved = float(evals[:n_keep].sum() / total)
    else:
        cum = np.cumsum(evals) / total
        n_keep = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        n_keep = min(n_keep, n)
        achieved = float(cum[n_keep - 1])

    return PcaTransform(
        channel=channel,
        mean=mean,
        std=std,
        eigenvalues=evals,
        components=np.ascontiguousarray(vecs[:, :n_keep]),
        n_retained=n_keep,
        explained_variance=achieved,
        zero_variance_columns=tuple(int(i) for i in dead),
    )


def fit_identity(
    block_lags: np.ndarray, channel: str, lags: tuple[int, ...] | None
) -> IdentityTransform:
    """Bind an identity transform to a block layout; ``lags=None`` selects all
    available lags."""
    available = [int(l) for l in block_lags]
    if lags is None:
        lags = tuple(available)
    lags = tuple(int(l) for l in lags)
    lag_to_col = {l: j for j, l in enumerate(available)}
    missing = [l for l in lags if l not in lag_to_col]
    if missing:
        raise ValueError(
            f"lags {missing} not available for channel {channel!r}; "
            f"window provides lags {available}"
        )
    return IdentityTransform(
        channel=channel, lags=lags, columns=tuple(lag_to_col[l] for l in lags)
    )


def apply_transform(transform: Transform, info: InformationMatrix) -> np.ndarray:
    """Feature block for one channel of an information matrix."""
    block = info.blocks[transform.channel]
    lags = info.block_lags[transform.channel]
    if isinstance(transform, IdentityTransform):
        cols = np.asarray(transform.columns, dtype=np.intp)
        if cols.size and (cols.max() >= block.shape[1] or
                          tuple(lags[cols]) != transform.lags):
            raise ValueError(
                f"channel {transform.channel!r}: block lag layout does not match "
                f"the fitted lags {transform.lags}"
            )
        return block[:, cols].copy()
    if block.shape[1] != transform.input_dim:
        raise ValueError(
            f"channel {transform.channel!r}: block width {block.shape[1]} != "
            f"fitted width {transform.input_dim}"
        )
    return _standardize_project(block, transform)


def _standardize_project(block: np.ndarray, transform: PcaTransform) -> np.ndarray:
    # fixed-order projection kernel keeps batch rows bitwise equal to
    # single-row application
    Z = np.ascontiguousarray((block - transform.mean) / transform.std)
    out = np.empty((Z.shape[0], transform.n_retained))
    project_rows(Z, transform.components, out)
    return out


def apply_single(transform: Transform, window: np.ndarray) -> np.ndarray:
    """One-row version of :func:`apply_transform` for the forecast loop."""
    if isinstance(transform, IdentityTransform):
        return window[np.asarray(transform.columns, dtype=np.intp)]
    if window.shape != transform.mean.shape:
        raise ValueError(
            f"window must have shape {transform.mean.shape}, got {window.shape}"
        )
    z = np.ascontiguousarray((window - transform.mean) / transform.std)
    out = np.empty((1, transform.n_retained))
    project_rows(z[None, :], transform.components, out)
    return out[0]


def apply_all(
    transforms: Mapping[str, Transform], info: InformationMatrix
) -> FeatureMatrix:
    """Concatenate per-channel feature blocks in the information-matrix channel
    order (exogenous channels first, output last)."""
    parts = []
    ranges = {}
    start = 0
    for name in info.channel_order:
        f = apply_transform(transforms[name], info)
        parts.append(f)
        ranges[name] = (start, start + f.shape[1])
        start += f.shape[1]
    return FeatureMatrix(
        values=np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0],
        channel_order=info.channel_order,
        ranges=ranges,
    )


def explained_variance_curve(transform: PcaTransform) -> np.ndarray:
    """(count, cumulative explained variance) pairs, shape (n, 2)."""
    total = transform.eigenvalues.sum()
    if total <= 0.0:
        cum = np.ones_like(transform.eigenvalues)
    else:
        cum = np.cumsum(transform.eigenvalues) / total
    counts = np.arange(1, transform.eigenvalues.shape[0] + 1, dtype=float)
    return np.column_stack([counts, cum])
