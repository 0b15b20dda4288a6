"""Sliding-window construction of the discretized information matrix.

Each row of the information matrix, indexed by a target time step t, collects
one window per channel: exogenous windows include the current step,
{x(t), x(t-dt), ..., x(t-n*dt)}, while the output window is strictly past,
{y(t-dt), ..., y(t-n*dt)}. Columns are ordered most-recent-first. Rows with
incomplete windows are dropped, so a trajectory of N steps yields
N - max(n_t) rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .timeseries import ExperimentalDesign, Trajectory

__all__ = [
    "MemoryConfig",
    "LagSpec",
    "InformationMatrix",
    "build_information_matrix",
    "stack_design",
    "subsample_rows",
]

_CEIL_EPS = 1e-9  # guards ceil(T/dt) against float wobble on exact multiples


@dataclass(frozen=True)
class MemoryConfig:
    """Per-channel sliding-window lengths in seconds.

    ``window_seconds`` applies to every channel unless overridden in
    ``per_channel``. The discrete window length is n_t = ceil(T/dt).
    """

    window_seconds: float
    per_channel: Mapping[str, float] = None

    def __post_init__(self):
        per = dict(self.per_channel or {})
        for name, T in [("window_seconds", self.window_seconds), *per.items()]:
            if not (T > 0):
                raise ValueError(f"memory {name!r} must be positive, got {T}")
        object.__setattr__(self, "per_channel", per)

    def seconds_for(self, channel: str) -> float:
        return self.per_channel.get(channel, self.window_seconds)

    def steps_for(self, channel: str, dt: float) -> int:
        n = math.ceil(self.seconds_for(channel) / dt - _CEIL_EPS)
        return max(n, 1)


@dataclass(frozen=True)
class LagSpec:
    """Explicit lag lists for the classical (raw-lag) model configuration."""

    exogenous: Mapping[str, tuple[int, ...]]
    output: tuple[int, ...]

    def __post_init__(self):
        exo = {name: tuple(int(l) for l in lags) for name, lags in self.exogenous.items()}
        out = tuple(int(l) for l in self.output)
        for name, lags in exo.items():
            if any(l < 0 for l in lags):
                raise ValueError(f"exogenous lags for {name!r} must be >= 0: {lags}")
        if any(l < 1 for l in out):
            raise ValueError(f"output lags must be >= 1 (causality): {out}")
        if not out:
            raise ValueError("output lag list must not be empty")
        object.__setattr__(self, "exogenous", exo)
        object.__setattr__(self, "output", out)

    @classmethod
    def classical(
        cls, exogenous_names, exogenous_order: int, output_order: int
    ) -> "LagSpec":
        """Dense lags 0..exogenous_order per input and 1..output_order."""
        return cls(
            exogenous={n: tuple(range(exogenous_order + 1)) for n in exogenous_names},
            output=tuple(range(1, output_order + 1)),
        )

    def memory_config(self, dt: float) -> MemoryConfig:
        """Smallest memory window covering every requested lag."""
        per = {n: max(max(lags, default=0), 1) * dt for n, lags in self.exogenous.items()}
        return MemoryConfig(window_seconds=max(self.output) * dt, per_channel=per)


@dataclass(frozen=True)
class InformationMatrix:
    """Per-channel window blocks plus the aligned target vector.

    ``blocks[ch]`` has one row per sample and one column per lag listed in
    ``block_lags[ch]`` (most-recent-first). ``row_steps`` is the target's step
    index inside its source trajectory and ``source_ids`` identifies that
    trajectory within the originating design.
    """

    channel_order: tuple[str, ...]  # exogenous..., output last
    output_channel: str
    blocks: Mapping[str, np.ndarray]
    block_lags: Mapping[str, np.ndarray]
    targets: np.ndarray
    row_steps: np.ndarray
    source_ids: np.ndarray
    dt: float

    @property
    def n_rows(self) -> int:
        return self.targets.shape[0]

    def take_rows(self, rows: np.ndarray) -> "InformationMatrix":
        return InformationMatrix(
            channel_order=self.channel_order,
            output_channel=self.output_channel,
            blocks={name: b[rows] for name, b in self.blocks.items()},
            block_lags=self.block_lags,
            targets=self.targets[rows],
            row_steps=self.row_steps[rows],
            source_ids=self.source_ids[rows],
            dt=self.dt,
        )


def _window_block(x: np.ndarray, width: int, first_row: int, n_rows: int) -> np.ndarray:
    """Rows k = first_row..first_row+n_rows-1 of windows x[k-width+1 : k+1],
    columns reversed to most-recent-first."""
    view = sliding_window_view(x, width)
    start = first_row - width + 1
    return np.ascontiguousarray(view[start : start + n_rows, ::-1])


def build_information_matrix(
    traj: Trajectory, mem: MemoryConfig, source_id: int = 0
) -> InformationMatrix:
    """One trajectory's window blocks and targets; see module docstring."""
    if traj.output is None:
        raise ValueError("trajectory has no output channel")
    dt = traj.dt
    N = traj.n_steps
    names = list(traj.exogenous_names) + [traj.output_name]
    n_steps = {name: mem.steps_for(name, dt) for name in names}
    for name, n_t in n_steps.items():
        if n_t >= N:
            raise ValueError(
                f"memory window of channel {name!r} ({n_t} steps) must be shorter "
                f"than the trajectory ({N} steps)"
            )
    max_nt = max(n_steps.values())
    n_rows = N - max_nt

    blocks = {}
    lags = {}
    for name in traj.exogenous_names:
        n_t = n_steps[name]
        # current step included: lags 0..n_t
        blocks[name] = _window_block(traj.exogenous[name], n_t + 1, max_nt, n_rows)
        lags[name] = np.arange(n_t + 1)
    n_t = n_steps[traj.output_name]
    # strictly past: lags 1..n_t
    blocks[traj.output_name] = _window_block(traj.output, n_t, max_nt - 1, n_rows)
    lags[traj.output_name] = np.arange(1, n_t + 1)

    return InformationMatrix(
        channel_order=tuple(names),
        output_channel=traj.output_name,
        blocks=blocks,
        block_lags=lags,
        targets=traj.output[max_nt:].copy(),
        row_steps=np.arange(max_nt, N),
        source_ids=np.full(n_rows, source_id),
        dt=dt,
    )


def stack_design(design: ExperimentalDesign, mem: MemoryConfig) -> InformationMatrix:
    """Concatenate per-trajectory information matrices; windows never cross
    trajectory boundaries."""
    parts = [
        build_information_matrix(traj, mem, source_id=i)
        for i, traj in enumerate(design)
    ]
    first = parts[0]
    return InformationMatrix(
        channel_order=first.channel_order,
        output_channel=first.output_channel,
        blocks={
            name: np.concatenate([p.blocks[name] for p in parts])
            for name in first.channel_order
        },
        block_lags=first.block_lags,
        targets=np.concatenate([p.targets for p in parts]),
        row_steps=np.concatenate([p.row_steps for p in parts]),
        source_ids=np.concatenate([p.source_ids for p in parts]),
        dt=first.dt,
    )


def subsample_rows(info: InformationMatrix, max_rows: int, seed: int) -> InformationMatrix:
    """Uniform random row subset without replacement; identity if it fits."""
    if max_rows < 1:
        raise ValueError("max_rows must be >= 1")
    if max_rows >= info.n_rows:
        return info
    rows = _draw_rows(info.n_rows, max_rows, seed)
    return info.take_rows(rows)


def _draw_rows(n_rows: int, max_rows: int, seed: int) -> np.ndarray:
    return np.sort(np.random.default_rng(seed).choice(n_rows, size=max_rows, replace=False))


def stack_design_subsampled(
    design: ExperimentalDesign, mem: MemoryConfig, max_rows: int, seed: int
) -> InformationMatrix:
    """Identical result to ``subsample_rows(stack_design(design, mem), ...)``
    but never materializes the unselected rows of the stacked matrix (one
    trajectory's full blocks at a time instead)."""
    if max_rows < 1:
        raise ValueError("max_rows must be >= 1")
    counts = []
    for traj in design:
        n_steps = {
            name: mem.steps_for(name, traj.dt)
            for name in (*traj.exogenous_names, traj.output_name)
        }
        counts.append(traj.n_steps - max(n_steps.values()))
    total = sum(counts)
    if max_rows >= total:
        return stack_design(design, mem)
    rows = _draw_rows(total, max_rows, seed)

    offsets = np.concatenate([[0], np.cumsum(counts)])
    parts = []
    for i, traj in enumerate(design):
        local = rows[(rows >= offsets[i]) & (rows < offsets[i + 1])] - offsets[i]
        part = build_information_matrix(traj, mem, source_id=i)
        parts.append(part.take_rows(local))
    first = parts[0]
    return InformationMatrix(
        channel_order=first.channel_order,
        output_channel=first.output_channel,
        blocks={
            name: np.concatenate([p.blocks[name] for p in parts])
            for name in first.channel_order
        },
        block_lags=first.block_lags,
        targets=np.concatenate([p.targets for p in parts]),
        row_steps=np.concatenate([p.row_steps for p in parts]),
        source_ids=np.concatenate([p.source_ids for p in parts]),
        dt=first.dt,
    )
