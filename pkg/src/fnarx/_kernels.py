"""Compiled inner loops shared by the batch and single-row evaluation paths.

Both kernels fix the floating-point operation order per output element
(ascending index, no reassociation), so evaluating a block row-by-row gives
bitwise-identical results to evaluating the whole block at once. fastmath
stays off for the same reason.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numba.types import float64, int64, void


@njit(void(float64[:, ::1], float64[:, ::1], float64[:, ::1]), cache=True)
def project_rows(Z, L, out):
    """out = Z @ L with a fixed j-ascending accumulation order per element."""
    n_rows, n = Z.shape
    m = L.shape[1]
    for i in range(n_rows):
        for k in range(m):
            out[i, k] = 0.0
        for j in range(n):
            zj = Z[i, j]
            for k in range(m):
                out[i, k] += zj * L[j, k]


@njit(
    void(float64[::1], int64, int64[::1], int64[::1], int64[::1], int64[::1],
         float64[::1], float64[::1]),
    cache=True,
)
def monomial_rows(xi, max_degree, fa, fb, extra_terms, extra_idx, pow_buf, out):
    """Evaluate monomial terms for one feature vector.

    pow_buf is an exponent-major scratch table: slot e*n + i holds xi[i]**e,
    built by repeated multiplication. fa/fb index the first two factors of each
    term (slot 0 holds the constant 1.0 for absent factors); terms with more
    than two factors pick up the rest via (extra_terms, extra_idx) pairs,
    ordered by term then dimension so the multiplication order is canonical.
    """
    n = xi.shape[0]
    for i in range(n):
        pow_buf[i] = 1.0
    for e in range(1, max_degree + 1):
        base = e * n
        for i in range(n):
            pow_buf[base + i] = pow_buf[base - n + i] * xi[i]
    for t in range(out.shape[0]):
        out[t] = pow_buf[fa[t]] * pow_buf[fb[t]]
    for k in range(extra_terms.shape[0]):
        out[extra_terms[k]] *= pow_buf[extra_idx[k]]
