"""Sampled multichannel trajectories, experimental designs, CSV I/O, resampling.

A trajectory couples a uniform sampling grid with named exogenous channels and
an optional output channel. Channel arrays are stored read-only so trajectories
can be shared freely across threads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SamplingGrid",
    "Trajectory",
    "ExperimentalDesign",
    "load_csv",
    "save_csv",
    "resample",
    "concat_designs",
    "split_design",
    "write_design",
    "load_design",
]

#: relative tolerance for "is this grid uniform / this ratio an integer"
GRID_RTOL = 1e-9


def _frozen(values, dtype=float) -> np.ndarray:
    a = np.array(values, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform time grid: samples at t_start + k*dt for k = 0..n_steps-1."""

    dt: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps)

    @property
    def duration(self) -> float:
        return self.dt * (self.n_steps - 1)


@dataclass(frozen=True)
class Trajectory:
    """One realization: exogenous channels and an optional output on a shared grid.

    ``exogenous`` maps channel name -> values; insertion order is the channel
    order used throughout the pipeline. ``output`` holds the response samples
    under the name ``output_name``. ``initial_conditions`` is free-form state
    metadata carried along for provenance.
    """

    grid: SamplingGrid
    exogenous: Mapping[str, np.ndarray]
    output: np.ndarray | None = None
    output_name: str = "y"
    initial_conditions: np.ndarray | None = None

    def __post_init__(self):
        exo = {}
        for name, values in self.exogenous.items():
            a = _frozen(values)
            if a.ndim != 1 or a.shape[0] != self.grid.n_steps:
                raise ValueError(
                    f"channel {name!r} has length {a.shape[0]}, "
                    f"expected {self.grid.n_steps}"
                )
            if not np.isfinite(a).all():
                raise ValueError(f"channel {name!r} contains non-finite values")
            exo[name] = a
        names = list(exo) + [self.output_name]
        if len(set(names)) != len(names) or "t" in names:
            raise ValueError(f"channel names must be unique and not 't': {names}")
        object.__setattr__(self, "exogenous", exo)
        if self.output is not None:
            out = _frozen(self.output)
            if out.ndim != 1 or out.shape[0] != self.grid.n_steps:
                raise ValueError(
                    f"output has length {out.shape[0]}, expected {self.grid.n_steps}"
                )
            if not np.isfinite(out).all():
                raise ValueError("output contains non-finite values")
            object.__setattr__(self, "output", out)
        if self.initial_conditions is not None:
            object.__setattr__(self, "initial_conditions", _frozen(self.initial_conditions))

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def exogenous_names(self) -> tuple[str, ...]:
        return tuple(self.exogenous)

    def channel(self, name: str) -> np.ndarray:
        """Values of a channel by name; the output channel counts as a channel."""
        if name == self.output_name:
            if self.output is None:
                raise KeyError(f"trajectory has no output channel {name!r}")
            return self.output
        try:
            return self.exogenous[name]
        except KeyError:
            raise KeyError(f"unknown channel {name!r}") from None

    def with_output(self, output: np.ndarray) -> "Trajectory":
        return Trajectory(
            grid=self.grid,
            exogenous=self.exogenous,
            output=output,
            output_name=self.output_name,
            initial_conditions=self.initial_conditions,
        )


@dataclass(frozen=True)
class ExperimentalDesign:
    """Ordered set of trajectories sharing channel schema and sampling rate.

    Lengths may differ between members (records of varying duration are fine);
    channel names and dt may not.
    """

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ValueError("experimental design must contain >= 1 trajectory")
        first = trajs[0]
        for i, traj in enumerate(trajs):
            if traj.exogenous_names != first.exogenous_names:
                raise ValueError(
                    f"trajectory {i} channel schema {traj.exogenous_names} "
                    f"!= {first.exogenous_names}"
                )
            if traj.output_name != first.output_name:
                raise ValueError(
                    f"trajectory {i} output name {traj.output_name!r} "
                    f"!= {first.output_name!r}"
                )
            if abs(traj.dt - first.dt) > GRID_RTOL * first.dt:
                raise ValueError(
                    f"trajectory {i} dt {traj.dt} != design dt {first.dt}"
                )
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i):
        return self.trajectories[i]

    @property
    def dt(self) -> float:
        return self.trajectories[0].dt

    @property
    def exogenous_names(self) -> tuple[str, ...]:
        return self.trajectories[0].exogenous_names

    @property
    def output_name(self) -> str:
        return self.trajectories[0].output_name


# ---------------------------------------------------------------------------
# CSV I/O


def _format_float(x: float) -> str:
    # repr gives the shortest string that round-trips the double exactly
    return repr(float(x))


def load_csv(path, schema: Mapping[str, str] | None = None) -> Trajectory:
    """Read a trajectory from CSV (first column ``t``, remaining columns channels).

    ``schema`` maps channel names to roles, ``"exogenous"`` or ``"output"``
    (at most one output). Channels missing from the schema default to
    exogenous. Rejects non-uniform time grids and missing/non-numeric cells.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be named 't', got {header[:1]}")
    names = header[1:]
    if not names:
        raise ValueError(f"{path}: no channel columns")
    if not rows:
        raise ValueError(f"{path}: no data rows")

    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}"
                ) from None
            if not math.isfinite(v):
                raise ValueError(
                    f"{path}: missing/non-finite value at row {i}, column {header[j]!r}"
                )
            data[i, j] = v

    t = data[:, 0]
    if len(t) > 1:
        diffs = np.diff(t)
        dt = float(np.median(diffs))
        if dt <= 0:
            raise ValueError(f"{path}: time column is not strictly increasing")
        bad = np.nonzero(np.abs(diffs - dt) > GRID_RTOL * abs(dt))[0]
        if bad.size:
            raise ValueError(f"{path}: non-uniform grid at row {bad[0] + 1}")
    else:
        dt = 1.0  # single sample: dt is arbitrary
    grid = SamplingGrid(dt=dt, n_steps=len(t), t_start=float(t[0]))

    schema = dict(schema or {})
    unknown = set(schema) - set(names)
    if unknown:
        raise ValueError(f"{path}: schema names {sorted(unknown)} not present in file")
    output_cols = [n for n in names if schema.get(n) == "output"]
    if len(output_cols) > 1:
        raise ValueError(f"{path}: schema declares multiple outputs {output_cols}")
    for name, role in schema.items():
        if role not in ("exogenous", "output"):
            raise ValueError(f"{path}: unknown role {role!r} for channel {name!r}")

    exogenous = {}
    output = None
    output_name = output_cols[0] if output_cols else "y"
    for j, name in enumerate(names):
        col = data[:, j + 1]
        if name == output_name and output_cols:
            output = col
        else:
            exogenous[name] = col
    return Trajectory(grid=grid, exogenous=exogenous, output=output, output_name=output_name)


def save_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV; floats are formatted to round-trip exactly."""
    path = Path(path)
    names = list(traj.exogenous_names)
    cols = [traj.exogenous[n] for n in names]
    if traj.output is not None:
        names.append(traj.output_name)
        cols.append(traj.output)
    times = traj.grid.times
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        for i in range(traj.n_steps):
            writer.writerow([_format_float(times[i])] + [_format_float(c[i]) for c in cols])


# ---------------------------------------------------------------------------
# Resampling


def _integer_ratio(a: float, b: float) -> int | None:
    """Return round(a/b) if a/b is an integer to within GRID_RTOL, else None."""
    ratio = a / b
    k = round(ratio)
    if k >= 1 and abs(ratio - k) <= GRID_RTOL * k:
        return k
    return None


def _upsample(x: np.ndarray, k: int) -> np.ndarray:
    n = x.shape[0]
    if n == 1:
        return x.copy()
    new_n = (n - 1) * k + 1
    # integer-grid interpolation: knot positions are hit exactly
    return np.interp(np.arange(new_n) / k, np.arange(n), x)


def resample(traj: Trajectory, new_dt: float) -> Trajectory:
    """Resample by an integer factor: linear interpolation up, decimation down.

    ``new_dt`` must be dt/k (up-sampling) or dt*k (decimation) for integer k;
    other ratios are rejected so that rate sweeps stay unambiguous.
    """
    if not (new_dt > 0):
        raise ValueError(f"new_dt must be positive, got {new_dt}")
    dt = traj.dt
    up = _integer_ratio(dt, new_dt)
    down = _integer_ratio(new_dt, dt)
    if up is not None and up >= 1:
        transform = lambda x: _upsample(x, up)
    elif down is not None and down >= 1:
        transform = lambda x: x[::down].copy()
    else:
        raise ValueError(
            f"new_dt {new_dt} is not an integer multiple or divisor of dt {dt}"
        )
    exogenous = {name: transform(vals) for name, vals in traj.exogenous.items()}
    output = transform(traj.output) if traj.output is not None else None
    n_steps = next(iter(exogenous.values())).shape[0] if exogenous else output.shape[0]
    grid = SamplingGrid(dt=new_dt, n_steps=n_steps, t_start=traj.grid.t_start)
    return Trajectory(
        grid=grid,
        exogenous=exogenous,
        output=output,
        output_name=traj.output_name,
        initial_conditions=traj.initial_conditions,
    )


# ---------------------------------------------------------------------------
# Design-level operations


def concat_designs(*designs: ExperimentalDesign) -> ExperimentalDesign:
    trajs = []
    for d in designs:
        trajs.extend(d.trajectories)
    return ExperimentalDesign(tuple(trajs))


def split_design(
    design: ExperimentalDesign, n_train: int, seed: int
) -> tuple[ExperimentalDesign, ExperimentalDesign]:
    """Deterministic random partition into (train, rest)."""
    n = len(design)
    if not (1 <= n_train < n):
        raise ValueError(f"n_train must be in [1, {n - 1}], got {n_train}")
    perm = np.random.default_rng(seed).permutation(n)
    train = ExperimentalDesign(tuple(design[i] for i in perm[:n_train]))
    rest = ExperimentalDesign(tuple(design[i] for i in perm[n_train:]))
    return train, rest


# ---------------------------------------------------------------------------
# Design manifests

MANIFEST_SCHEMA = "fnarx-design/1"


def write_design(design: ExperimentalDesign, out_dir, stem: str = "traj") -> Path:
    """Write member CSVs plus a manifest listing files and channel roles."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, traj in enumerate(design):
        name = f"{stem}_{i:04d}.csv"
        save_csv(traj, out_dir / name)
        files.append(name)
    channels = {n: "exogenous" for n in design.exogenous_names}
    if design[0].output is not None:
        channels[design.output_name] = "output"
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "dt": design.dt,
        "channels": channels,
        "trajectories": files,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def load_design(manifest_path) -> ExperimentalDesign:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(
            f"{manifest_path}: unsupported manifest schema {manifest.get('schema')!r}"
        )
    schema = manifest["channels"]
    trajs = [
        load_csv(manifest_path.parent / rel, schema=schema)
        for rel in manifest["trajectories"]
    ]
    return ExperimentalDesign(tuple(trajs))
