"""Forward, backward and projection operators of the splitting scheme.

With ``phi_2(x) = (mu/2) ||A x - u||_{2,2}^2`` the forward (gradient) step is
``G(x) = x - tau * mu * A^T (A x - u)`` and the backward step is row-wise
soft thresholding by ``tau``. Their composition is the iteration map.
"""

from __future__ import annotations

import warnings
from numbers import Real

import numpy as np

from ._core import ConfigurationError, check_matrix, check_problem, row_norms

__all__ = [
    "LowPrecisionWarning",
    "OperatorContext",
    "spectral_norm_upper_bound",
    "gradient",
    "forward_step",
    "backward_step",
    "project_tau_ball",
    "fb_step",
]


class LowPrecisionWarning(RuntimeWarning):
    """Power iteration did not settle; a cruder (but valid) bound was used."""


def _power_iteration(A, max_iters, tol, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for k in range(1, max_iters + 1):
        w = A.T @ (A @ v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector landed in the null space; H is nonzero, so retry
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if k > 1 and abs(lam_new - lam) <= tol * lam_new:
            return lam_new, True
        lam = lam_new
    return lam, False


def spectral_norm_upper_bound(A, rel_tol=1e-3, max_iters=1000, seed=0):
    """Upper bound on ``||A^T A||_2`` from seeded power iteration.

    The Rayleigh-quotient estimate approaches the top eigenvalue from below,
    so the converged estimate is inflated by ``1 + rel_tol``. If the
    iteration does not settle within ``max_iters``, the squared Frobenius
    norm (always an upper bound) is inflated instead and a
    :class:`LowPrecisionWarning` is issued.

    Parameters
    ----------
    A : array of shape (m, N)
    rel_tol : float in (0, 1)
        Relative inflation applied to the estimate.
    max_iters : int
    seed : int
        Seed of the random start vector.

    Returns
    -------
    float
    """
    A = check_matrix(A, "A")
    if not 0.0 < rel_tol < 1.0:
        raise ConfigurationError("rel_tol must lie in (0, 1)")
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    if not np.any(A):
        return 0.0
    # stop well before the inflation margin is at stake
    lam, converged = _power_iteration(A, max_iters, 1e-3 * rel_tol, seed)
    if not converged:
        warnings.warn(
            f"power iteration did not converge in {max_iters} iterations; "
            "falling back to the Frobenius bound",
            LowPrecisionWarning,
            stacklevel=2,
        )
        return float(np.sum(A * A)) * (1.0 + rel_tol)
    return lam * (1.0 + rel_tol)


class OperatorContext:
    """Problem data and step parameters shared by all operators.

    Parameters
    ----------
    A : array of shape (m, N)
        Sensing matrix.
    u : array of shape (m, Omega) or (m,)
        Measurements.
    tau : float or "auto"
        Step size. ``"auto"`` picks ``1 / (mu * bound)`` where ``bound`` is
        the power-iteration upper bound on ``||A^T A||_2``.
    mu : float
        Weight of the data-fidelity term.
    spectral_bound : float, optional
        Precomputed upper bound on ``||A^T A||_2``; estimated when omitted.
    rel_tol, seed : passed to :func:`spectral_norm_upper_bound`.
    check_step : bool
        Enforce ``tau < 2 / (mu * bound)``. Disable only to probe the
        behaviour of an invalid step on purpose.

    The arrays are stored as read-only copies.
    """

    def __init__(self, A, u, tau="auto", mu=1.0, *, spectral_bound=None,
                 rel_tol=1e-3, seed=0, check_step=True):
        A, u = check_problem(A, u)
        if not isinstance(mu, Real) or not np.isfinite(mu) or mu <= 0:
            raise ConfigurationError(f"mu must be a positive real, got {mu!r}")
        if spectral_bound is None:
            spectral_bound = spectral_norm_upper_bound(A, rel_tol=rel_tol, seed=seed)
        elif spectral_bound < 0 or not np.isfinite(spectral_bound):
            raise ConfigurationError("spectral_bound must be finite and nonnegative")

        self.A = A.copy()
        self.u = u.copy()
        self.A.flags.writeable = False
        self.u.flags.writeable = False
        self.mu = float(mu)
        self.spectral_bound = float(spectral_bound)
        lipschitz = self.mu * self.spectral_bound
        self.max_step = 2.0 / lipschitz if lipschitz > 0 else np.inf

        if isinstance(tau, str):
            if tau != "auto":
                raise ConfigurationError(f"tau must be a positive real or 'auto', got {tau!r}")
            tau = 1.0 / lipschitz if lipschitz > 0 else 1.0
        if not isinstance(tau, Real) or not np.isfinite(tau) or tau <= 0:
            raise ConfigurationError(f"tau must be a positive real, got {tau!r}")
        if check_step and not tau < self.max_step:
            raise ConfigurationError(
                f"step size tau={tau!r} violates tau < 2/(mu*||A^T A||) = {self.max_step!r}"
            )
        self.tau = float(tau)

    @property
    def shape(self):
        """``(N, Omega)``, the shape of a signal matrix for this problem."""
        return self.A.shape[1], self.u.shape[1]

    def check_signal(self, x, name="x"):
        x = check_matrix(x, name)
        if x.shape != self.shape:
            raise ConfigurationError(f"{name} has shape {x.shape}, expected {self.shape}")
        return x

    def with_tau(self, tau, check_step=True):
        """Same problem with another step size (spectral bound reused)."""
        return OperatorContext(self.A, self.u, tau, self.mu,
                               spectral_bound=self.spectral_bound, check_step=check_step)

    def __repr__(self):
        m, n = self.A.shape
        return (f"OperatorContext(m={m}, N={n}, Omega={self.u.shape[1]}, "
                f"tau={self.tau!r}, mu={self.mu!r})")


def gradient(ctx, x):
    """Gradient of the fidelity term, ``mu * A^T (A x - u)``."""
    x = ctx.check_signal(x)
    return ctx.mu * (ctx.A.T @ (ctx.A @ x - ctx.u))


def forward_step(ctx, x):
    """Gradient step ``x - tau * gradient(ctx, x)``."""
    x = ctx.check_signal(x)
    return x - ctx.tau * (ctx.mu * (ctx.A.T @ (ctx.A @ x - ctx.u)))


def _shrink(tau, z):
    norms = row_norms(z)
    keep = norms > tau
    scale = np.zeros_like(norms)
    scale[keep] = 1.0 - tau / norms[keep]
    # rows at or below the threshold must come out as exact +0.0
    return np.where(keep[:, None], z * scale[:, None], 0.0)


def backward_step(tau, x):
    """Row-wise soft thresholding (the proximal map of ``tau * ||.||_{2,1}``).

    A row ``x_j`` with ``||x_j|| <= tau`` becomes exactly zero; any other
    row is scaled by ``1 - tau / ||x_j||``. Accepts a matrix or one row.
    """
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return _shrink(tau, x[None, :])[0]
    return _shrink(tau, x)


def project_tau_ball(tau, v):
    """Metric projection onto the Euclidean ball of radius ``tau``.

    ``v`` may be a single channel vector or a matrix, in which case every
    row is projected. ``v - project_tau_ball(tau, v) == backward_step(tau, v)``.
    """
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    if single:
        v = v[None, :]
    norms = row_norms(v)
    outside = norms > tau
    scale = np.ones_like(norms)
    scale[outside] = tau / norms[outside]
    out = v * scale[:, None]
    return out[0] if single else out


def fb_step(ctx, x):
    """One forward-backward iteration, ``backward_step(tau, forward_step(x))``."""
    return _shrink(ctx.tau, forward_step(ctx, x))
