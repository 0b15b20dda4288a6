"""Linear solvers: decomposition-based least squares, the least-angle
regression path on standardized regressors, and hybrid coefficient
recomputation.

The path solver standardizes every regressor column to zero mean and unit
variance (constant columns are excluded — standardization would annihilate
them) and centers the targets. It then adds one regressor per iteration,
never removing any, until the iteration cap, the effective column count or
the sample-size limit is reached. Final coefficients are not taken from the
path: for a chosen iteration, the active columns are re-fit by ordinary least
squares on the original unstandardized data, with the constant column always
included.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "LarsPath",
    "PathIteration",
    "SparseCoefficients",
    "ols_solve",
    "lars_path",
    "hybrid_refit",
]

_DEGENERATE_STEP = 1e-12
_REFRESH_EVERY = 50  # exact correlation recompute cadence (caps update drift)


@dataclass(frozen=True)
class SparseCoefficients:
    """Dense coefficient vector whose nonzeros live on the active index list."""

    values: np.ndarray
    active: tuple[int, ...]
    rank_deficient: bool = False

    @property
    def n_active(self) -> int:
        return len(self.active)


@dataclass(frozen=True)
class PathIteration:
    """Active set (in entry order) and standardized-space coefficient values
    aligned with it."""

    active: tuple[int, ...]
    coefficients: np.ndarray


@dataclass(frozen=True)
class LarsPath:
    iterations: tuple[PathIteration, ...]
    column_mean: np.ndarray
    column_std: np.ndarray
    y_mean: float
    constant_columns: tuple[int, ...]  # zero-variance columns kept out of the path
    degenerate_stop: bool = False

    def __len__(self) -> int:
        return len(self.iterations)

    def active_at(self, iteration: int) -> tuple[int, ...]:
        """Active set after `iteration` steps (1-based)."""
        if not (1 <= iteration <= len(self.iterations)):
            raise IndexError(
                f"iteration must be in [1, {len(self.iterations)}], got {iteration}"
            )
        return self.iterations[iteration - 1].active


def _as_matrix(psi) -> np.ndarray:
    values = psi.values if hasattr(psi, "values") else psi
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"regressor matrix must be 2-D, got shape {a.shape}")
    return a


def ols_solve(psi, y: np.ndarray) -> SparseCoefficients:
    """Least squares via SVD (never the normal equations); rank-deficient
    systems get the minimum-norm solution and a flag.

    Columns are equilibrated to unit norm before the solve so the SVD rank
    cutoff reflects collinearity, not the (possibly wildly different) units
    of individual regressors.
    """
    a = _as_matrix(psi)
    y = np.asarray(y, dtype=float)
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"need >= 1 row and >= 1 column, got shape {a.shape}")
    if a.shape[0] != y.shape[0]:
        raise ValueError(f"rows {a.shape[0]} != targets {y.shape[0]}")
    norms = np.linalg.norm(a, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    coef, _, rank, _ = np.linalg.lstsq(a / scale, y, rcond=None)
    return SparseCoefficients(
        values=coef / scale,
        active=tuple(range(a.shape[1])),
        rank_deficient=bool(rank < a.shape[1]),
    )


def lars_path(psi, y: np.ndarray, max_iterations: int) -> LarsPath:
    """Least-angle regression on standardized columns and centered targets.

    Correlation ties break toward the lowest column index; a column linearly
    dependent on the active set (an exact duplicate, say) is permanently
    skipped. A numerically zero equiangular step ends the path early with
    ``degenerate_stop`` set. The active Gram matrix is maintained through an
    incrementally grown Cholesky factor, so the cost per iteration is one pass
    over the data.
    """
    a = _as_matrix(psi)
    y = np.asarray(y, dtype=float)
    n_rows, p = a.shape
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if n_rows != y.shape[0]:
        raise ValueError(f"rows {n_rows} != targets {y.shape[0]}")

    mean = a.mean(axis=0)
    std = a.std(axis=0)
    constant = np.nonzero(std <= _DEGENERATE_STEP * np.maximum(1.0, np.abs(mean)))[0]
    eligible = np.ones(p, dtype=bool)
    eligible[constant] = False

    y_mean = float(y.mean())
    r = y - y_mean
    empty = LarsPath(
        iterations=(),
        column_mean=mean,
        column_std=std,
        y_mean=y_mean,
        constant_columns=tuple(int(i) for i in constant),
    )
    if float(np.abs(r).max(initial=0.0)) <= _DEGENERATE_STEP * max(1.0, abs(y_mean)):
        warnings.warn("targets are constant; empty regression path", stacklevel=2)
        return empty
    if not eligible.any():
        warnings.warn("all regressors are constant; empty regression path", stacklevel=2)
        return empty

    safe_std = std.copy()
    safe_std[constant] = 1.0
    X = (a - mean) / safe_std

    n_limit = min(max_iterations, int(eligible.sum()), max(n_rows - 1, 1))
    chol = np.zeros((n_limit, n_limit))  # upper triangular, chol.T @ chol = signed Gram
    active_cols = np.empty((n_rows, n_limit))  # sign-adjusted active columns
    active: list[int] = []
    signs: list[float] = []
    beta_signed = np.zeros(n_limit)
    iterations: list[PathIteration] = []
    degenerate = False
    in_active = np.zeros(p, dtype=bool)
    c = X.T @ r

    while len(iterations) < n_limit:
        selectable = eligible & ~in_active
        if not selectable.any():
            break
        corr = np.where(selectable, np.abs(c), -np.inf)
        j_new = int(np.argmax(corr))  # ties resolve to the lowest index
        if corr[j_new] <= _DEGENERATE_STEP:
            break
        s_new = 1.0 if c[j_new] >= 0 else -1.0
        v = s_new * X[:, j_new]

        k = len(active)
        g = active_cols[:, :k].T @ v
        vv = float(v @ v)
        if k:
            z = scipy.linalg.solve_triangular(chol[:k, :k], g, trans="T", lower=False)
        else:
            z = np.empty(0)
        d2 = vv - float(z @ z)
        if d2 <= 1e-10 * max(vv, 1.0):
            # linearly dependent on the active set: never enters
            eligible[j_new] = False
            continue
        chol[:k, k] = z
        chol[k, k] = np.sqrt(d2)
        active_cols[:, k] = v
        active.append(j_new)
        signs.append(s_new)
        in_active[j_new] = True
        k += 1

        ones = np.ones(k)
        w = scipy.linalg.solve_triangular(
            chol[:k, :k],
            scipy.linalg.solve_triangular(chol[:k, :k], ones, trans="T", lower=False),
            lower=False,
        )
        norm = float(ones @ w)
        if norm <= 0:
            degenerate = True
            iterations.append(_record(active, signs, beta_signed[:k]))
            break
        A = 1.0 / np.sqrt(norm)
        u = active_cols[:, :k] @ (A * w)
        corr_max = float(np.abs(c[active]).max())
        full_step = corr_max / A

        a_corr = X.T @ u
        rest = eligible & ~in_active
        if rest.any():
            cj = c[rest]
            aj = a_corr[rest]
            with np.errstate(divide="ignore", invalid="ignore"):
                plus = (corr_max - cj) / (A - aj)
                minus = (corr_max + cj) / (A + aj)
            steps = np.concatenate([plus, minus])
            steps = steps[np.isfinite(steps) & (steps > _DEGENERATE_STEP)]
            gamma = min(float(steps.min()), full_step) if steps.size else full_step
        else:
            gamma = full_step  # final step lands on the least-squares solution

        if gamma <= _DEGENERATE_STEP:
            degenerate = True
            iterations.append(_record(active, signs, beta_signed[:k]))
            break

        beta_signed[:k] += gamma * A * w
        r -= gamma * u
        if len(iterations) % _REFRESH_EVERY == _REFRESH_EVERY - 1:
            c = X.T @ r
        else:
            c -= gamma * a_corr
        iterations.append(_record(active, signs, beta_signed[:k]))

    return LarsPath(
        iterations=tuple(iterations),
        column_mean=mean,
        column_std=std,
        y_mean=y_mean,
        constant_columns=tuple(int(i) for i in constant),
        degenerate_stop=degenerate,
    )


def _record(active: list[int], signs: list[float], beta_signed: np.ndarray) -> PathIteration:
    return PathIteration(
        active=tuple(active),
        coefficients=beta_signed * np.asarray(signs),
    )


def hybrid_refit(path: LarsPath, psi, y: np.ndarray, iteration: int) -> SparseCoefficients:
    """Ordinary least squares on the original (unstandardized) columns active
    at a path iteration, plus any constant column."""
    a = _as_matrix(psi)
    active = path.active_at(iteration)
    columns = list(path.constant_columns) + list(active)
    solution = ols_solve(a[:, columns], np.asarray(y, dtype=float))
    values = np.zeros(a.shape[1])
    values[columns] = solution.values
    return SparseCoefficients(
        values=values,
        active=tuple(columns),
        rank_deficient=solution.rank_deficient,
    )
