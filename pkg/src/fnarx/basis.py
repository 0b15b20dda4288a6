"""Truncated multi-index sets and monomial regressor evaluation.

A multi-index set collects the exponent vectors allowed by three constraints:
total degree (through the q-quasinorm), interaction order (number of nonzero
exponents) and the hyperbolic parameter q in (0, 1], which thins out
high-interaction terms as it decreases. Regressors are plain monomials of the
feature vector, one column per exponent vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._kernels import monomial_rows

__all__ = [
    "MultiIndexSet",
    "RegressorMatrix",
    "generate_multi_indices",
    "evaluate_regressors",
    "evaluate_single",
]

_QNORM_SLACK = 1e-12


class _EvalPlan:
    """Factor tables driving the monomial kernel for a fixed exponent set."""

    def __init__(self, exponents: np.ndarray):
        exponents = np.asarray(exponents, dtype=np.int64)
        p, n = exponents.shape
        max_degree = int(exponents.max(initial=0))
        fa = np.zeros(p, dtype=np.int64)  # slot 0 of pow table is the constant 1
        fb = np.zeros(p, dtype=np.int64)
        extra_terms: list[int] = []
        extra_idx: list[int] = []
        for t in range(p):
            dims = np.nonzero(exponents[t])[0]
            slots = [int(exponents[t, d]) * n + int(d) for d in dims]
            if len(slots) >= 1:
                fa[t] = slots[0]
            if len(slots) >= 2:
                fb[t] = slots[1]
            for s in slots[2:]:
                extra_terms.append(t)
                extra_idx.append(s)
        self.n_dims = n
        self.n_terms = p
        self.max_degree = max_degree
        self.fa = fa
        self.fb = fb
        self.extra_terms = np.asarray(extra_terms, dtype=np.int64)
        self.extra_idx = np.asarray(extra_idx, dtype=np.int64)

    def evaluate_into(self, xi: np.ndarray, out: np.ndarray, pow_buf: np.ndarray) -> None:
        monomial_rows(xi, self.max_degree, self.fa, self.fb,
                      self.extra_terms, self.extra_idx, pow_buf, out)

    def new_pow_buf(self) -> np.ndarray:
        return np.empty((self.max_degree + 1) * self.n_dims)


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered exponent vectors; graded ordering, descending-lex within a grade."""

    dimension: int
    degree: int
    interaction_order: int
    q_norm: float
    exponents: np.ndarray  # (p, dimension) int64

    def __post_init__(self):
        e = np.ascontiguousarray(np.asarray(self.exponents, dtype=np.int64))
        e.setflags(write=False)
        object.__setattr__(self, "exponents", e)

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def subset(self, term_indices: Iterable[int]) -> "MultiIndexSet":
        """Same truncation parameters, restricted exponent list (used for the
        active terms of a fitted sparse model)."""
        idx = np.asarray(list(term_indices), dtype=np.intp)
        return MultiIndexSet(
            dimension=self.dimension,
            degree=self.degree,
            interaction_order=self.interaction_order,
            q_norm=self.q_norm,
            exponents=self.exponents[idx],
        )

    def plan(self) -> _EvalPlan:
        plan = self.__dict__.get("_plan")
        if plan is None:
            plan = _EvalPlan(self.exponents)
            object.__setattr__(self, "_plan", plan)
        return plan


def _q_norm(alpha: tuple[int, ...], q: float) -> float:
    return float(sum(a**q for a in alpha if a)) ** (1.0 / q)


def generate_multi_indices(
    dimension: int, degree: int, interaction_order: int, q_norm: float = 1.0
) -> MultiIndexSet:
    """All exponent vectors with at most ``interaction_order`` nonzero entries
    and q-quasinorm at most ``degree`` (evaluated with a 1e-12 slack so
    boundary indices are platform-stable)."""
    if dimension < 1 or degree < 1:
        raise ValueError("dimension and degree must be >= 1")
    if not (1 <= interaction_order <= dimension):
        raise ValueError(
            f"interaction_order must be in [1, {dimension}], got {interaction_order}"
        )
    if not (0.0 < q_norm <= 1.0):
        raise ValueError(f"q_norm must be in (0, 1], got {q_norm}")

    indices: list[tuple[int, ...]] = [(0,) * dimension]
    for total in range(1, degree + 1):
        grade: list[tuple[int, ...]] = []
        max_support = min(interaction_order, total)
        for n_active in range(1, max_support + 1):
            for support in itertools.combinations(range(dimension), n_active):
                # compositions of `total` into n_active positive parts
                for cuts in itertools.combinations(range(1, total), n_active - 1):
                    bounds = (0, *cuts, total)
                    parts = [bounds[i + 1] - bounds[i] for i in range(n_active)]
                    alpha = [0] * dimension
                    for pos, part in zip(support, parts):
                        alpha[pos] = part
                    alpha = tuple(alpha)
                    if q_norm < 1.0 and _q_norm(alpha, q_norm) > degree + _QNORM_SLACK:
                        continue
                    grade.append(alpha)
        grade.sort(key=lambda a: tuple(-x for x in a))
        indices.extend(grade)

    return MultiIndexSet(
        dimension=dimension,
        degree=degree,
        interaction_order=interaction_order,
        q_norm=q_norm,
        exponents=np.array(indices, dtype=np.int64),
    )


@dataclass(frozen=True)
class RegressorMatrix:
    """Monomial values, one column per multi-index, rows aligned with the
    feature matrix."""

    values: np.ndarray  # (n_rows, p)
    indices: MultiIndexSet

    @property
    def n_terms(self) -> int:
        return self.values.shape[1]


def evaluate_regressors(indices: MultiIndexSet, features) -> RegressorMatrix:
    """Monomial columns for every row of a feature matrix.

    Powers are built by repeated multiplication and factors combined in
    ascending-dimension order, exactly mirroring :func:`evaluate_single`, so
    matrix and single-row evaluation agree bitwise.
    """
    X = features.values if hasattr(features, "values") else np.asarray(features, float)
    if X.ndim != 2 or X.shape[1] != indices.dimension:
        raise ValueError(
            f"features must be 2-D with width {indices.dimension}, got {X.shape}"
        )
    if not np.isfinite(X).all():
        raise ValueError("features contain non-finite values")

    exps = indices.exponents
    p = exps.shape[0]
    if p == 0:
        return RegressorMatrix(values=np.empty((X.shape[0], 0)), indices=indices)
    max_e = exps.max(axis=0)  # per-dimension maximum exponent
    powers: dict[tuple[int, int], np.ndarray] = {}
    for d in range(indices.dimension):
        if max_e[d] >= 1:
            powers[(d, 1)] = X[:, d]
            for e in range(2, int(max_e[d]) + 1):
                powers[(d, e)] = powers[(d, e - 1)] * X[:, d]

    out = np.empty((X.shape[0], p))
    for t in range(p):
        dims = np.nonzero(exps[t])[0]
        if dims.size == 0:
            out[:, t] = 1.0
            continue
        col = powers[(int(dims[0]), int(exps[t, dims[0]]))]
        for d in dims[1:]:
            col = col * powers[(int(d), int(exps[t, d]))]
        out[:, t] = col
    return RegressorMatrix(values=out, indices=indices)


def evaluate_single(indices: MultiIndexSet, feature_vector: np.ndarray) -> np.ndarray:
    """One regressor row; values bitwise-identical to the matrix version."""
    xi = np.ascontiguousarray(feature_vector, dtype=float)
    if xi.shape != (indices.dimension,):
        raise ValueError(
            f"feature vector must have shape ({indices.dimension},), got {xi.shape}"
        )
    plan = indices.plan()
    out = np.empty(plan.n_terms)
    plan.evaluate_into(xi, out, plan.new_pow_buf())
    return out
