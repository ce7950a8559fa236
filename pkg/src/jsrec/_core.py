"""Dense matrix conventions, mixed norms and row accessors.

A *signal matrix* ``x`` has shape ``(N, Omega)``: row ``j`` holds the
coefficients of atom ``j`` across all channels. The sensing matrix ``A`` is
``(m, N)`` and the measurements ``u`` are ``(m, Omega)``. Everything is a
plain float64 :class:`numpy.ndarray`; row indices are 0-based.
"""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


class ConfigurationError(ValueError):
    """Raised for invalid parameters or inconsistent problem dimensions."""


def check_matrix(x, name="x", copy=False):
    """Return ``x`` as a finite, 2-D float64 array.

    1-D input is promoted to a single column so single-channel problems can
    be passed as vectors.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    try:
        return check_array(
            x,
            dtype=np.float64,
            ensure_all_finite=True,
            ensure_min_samples=1,
            ensure_min_features=1,
            copy=copy,
            input_name=name,
        )
    except ValueError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc


def check_problem(A, u):
    """Validate a sensing/measurement pair and return them as arrays."""
    A = check_matrix(A, "A")
    u = check_matrix(u, "u")
    if A.shape[0] != u.shape[0]:
        raise ConfigurationError(
            f"A has {A.shape[0]} rows but u has {u.shape[0]} (measurement count mismatch)"
        )
    return A, u


def row_norms(x):
    """Euclidean norm of every row of ``x``."""
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def mixed_norm(x, p=2, q=1):
    """The mixed norm ``(sum_i ||x_i||_p^q)^(1/q)``.

    Only ``p, q in {1, 2}`` are supported; ``(2, 2)`` is the Frobenius norm
    and ``(2, 1)`` is the joint-sparsity penalty.
    """
    if p not in (1, 2) or q not in (1, 2):
        raise ConfigurationError(f"unsupported mixed norm exponents (p, q) = ({p}, {q})")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    r = row_norms(x) if p == 2 else np.abs(x).sum(axis=1)
    if q == 1:
        return float(r.sum())
    return float(np.sqrt(np.dot(r, r)))


def row(x, j):
    """Row ``j`` (0-based) of ``x``, as a copy."""
    x = np.asarray(x)
    n = x.shape[0]
    if not 0 <= j < n:
        raise IndexError(f"row index {j} out of range for a matrix with {n} rows")
    return x[j].copy()


def row_support(x, zero_tol=0.0):
    """Sorted indices of rows whose Euclidean norm exceeds ``zero_tol``."""
    if zero_tol < 0:
        raise ConfigurationError("zero_tol must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.flatnonzero(row_norms(x) > zero_tol)
