"""Numpy/scipy fallback kernels for packed exponential-sum constraints.

Semantics match the compiled kernels in ``_kernels_cy`` exactly: exponents
above ``cap`` mark the owning constraint value as ``+inf`` (the line search
rejects such points) while the stored term weights stay finite.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

BACKEND = "python"


def constraint_values(pack, u, cap):
    """Per-constraint values ``h`` and term weights ``e = exp(z)``."""
    if pack.t:
        z = (
            np.bincount(pack.nnz_term, pack.a_val * u[pack.a_idx], minlength=pack.t)
            + pack.b
        )
    else:
        z = np.empty(0)
    e = np.exp(np.minimum(z, cap))
    if pack.f_idx.size:
        tails = (
            np.bincount(pack.f_cons, pack.f_val * u[pack.f_idx], minlength=pack.m)
            + pack.g
        )
    else:
        tails = pack.g.copy()
    h = np.bincount(pack.term_cons, e, minlength=pack.m) + tails
    over = z > cap
    if over.any():
        h[np.unique(pack.term_cons[over])] = np.inf
    return h, e


def constraint_grads(pack, u, e):
    """Dense (m, n) matrix of constraint gradients at the point of ``e``."""
    m, n = pack.m, pack.n
    flat = np.zeros(m * n)
    if pack.a_idx.size:
        flat += np.bincount(
            pack.nnz_cons * n + pack.a_idx,
            e[pack.nnz_term] * pack.a_val,
            minlength=m * n,
        )
    if pack.f_idx.size:
        flat += np.bincount(
            pack.f_cons * n + pack.f_idx, pack.f_val, minlength=m * n
        )
    return flat.reshape(m, n)


def scaled_gram(pack, w):
    """Weighted Gram matrix ``sum_k w_k a_k a_k^T`` over the term rows."""
    n = pack.n
    if pack.t == 0:
        return np.zeros((n, n))
    a = sp.csr_matrix((pack.a_val, pack.a_idx, pack.a_indptr), shape=(pack.t, n))
    return (a.T @ sp.diags(w) @ a).toarray()
