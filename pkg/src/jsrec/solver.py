"""The forward-backward iteration and its stopping rules."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from numbers import Integral, Real

import numpy as np

from ._core import ConfigurationError, mixed_norm, row_norms
from .operators import OperatorContext, _shrink, gradient

__all__ = [
    "SolverConfig",
    "SolveResult",
    "objective",
    "optimality_residual",
    "iterates",
    "solve",
]

RECORD_MODES = ("none", "norms", "full")
TERMINATIONS = ("fixed_point_tol", "objective_tol", "max_iters")


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a forward-backward solve.

    The fixed-point rule stops when
    ``||x^{k+1} - x^k||_F <= tol * max(1, ||x^k||_F)``; the optional
    objective rule stops when the objective changes by at most
    ``objective_tol * max(1, |phi(x^k)|)``. ``record`` is one of
    ``"none"``, ``"norms"`` (scalar traces) or ``"full"`` (scalar traces plus
    at most ``history_cap`` uniformly thinned iterate snapshots).
    """

    tau: float | str = "auto"
    mu: float = 1.0
    max_iters: int = 100_000
    tol: float = 1e-12
    objective_tol: float | None = None
    record: str = "norms"
    history_cap: int = 200
    seed: int = 0
    spectral_rel_tol: float = 1e-3

    def __post_init__(self):
        if not isinstance(self.max_iters, Integral) or self.max_iters < 1:
            raise ConfigurationError("max_iters must be an integer >= 1")
        if not isinstance(self.tol, Real) or self.tol < 0:
            raise ConfigurationError("tol must be a nonnegative real")
        if self.objective_tol is not None and self.objective_tol < 0:
            raise ConfigurationError("objective_tol must be nonnegative")
        if self.record not in RECORD_MODES:
            raise ConfigurationError(f"record must be one of {RECORD_MODES}, got {self.record!r}")
        if self.history_cap < 2:
            raise ConfigurationError("history_cap must be >= 2")
        if isinstance(self.tau, str) and self.tau != "auto":
            raise ConfigurationError(f"tau must be a positive real or 'auto', got {self.tau!r}")
        if not isinstance(self.tau, str) and not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if not self.mu > 0:
            raise ConfigurationError("mu must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SolveResult:
    """Outcome of :func:`solve`.

    ``objective_trace`` has ``iterations + 1`` entries (``phi(x^0)`` through
    ``phi(x^K)``) and ``step_norm_trace`` has ``iterations`` entries. Both are
    empty when recording is off. ``history`` is a list of ``(k, x^k)`` pairs.
    """

    x: np.ndarray
    iterations: int
    termination: str
    tau: float
    mu: float
    spectral_bound: float
    x0: np.ndarray
    objective_trace: np.ndarray = field(repr=False)
    step_norm_trace: np.ndarray = field(repr=False)
    history: list | None = field(default=None, repr=False)

    @property
    def converged(self):
        return self.termination != "max_iters"

    @property
    def final_objective(self):
        return self.objective_trace[-1] if len(self.objective_trace) else None


def objective(ctx, x):
    """``||x||_{2,1} + (mu/2) ||A x - u||_{2,2}^2``."""
    x = ctx.check_signal(x)
    r = ctx.A @ x - ctx.u
    return mixed_norm(x, 2, 1) + 0.5 * ctx.mu * float(np.sum(r * r))


def _objective_from_residual(ctx, x, r):
    return float(row_norms(x).sum()) + 0.5 * ctx.mu * float(np.sum(r * r))


def optimality_residual(ctx, x):
    """Distance-like measure of how far ``x`` is from the solution set.

    Row ``j`` contributes ``||g_j + x_j/||x_j||||`` when ``x_j != 0`` and
    ``max(||g_j|| - 1, 0)`` otherwise, where ``g`` is the fidelity gradient;
    the maximum over rows is returned. It is zero exactly at minimizers.
    """
    g = gradient(ctx, x)
    x = np.asarray(x, dtype=np.float64).reshape(g.shape)
    nx = row_norms(x)
    nz = nx > 0
    res = np.maximum(row_norms(g) - 1.0, 0.0)
    if np.any(nz):
        res[nz] = row_norms(g[nz] + x[nz] / nx[nz, None])
    return float(res.max()) if res.size else 0.0


def _step(ctx, x, r):
    # single definition of the update so replays reproduce solves bit for bit
    return _shrink(ctx.tau, x - ctx.tau * (ctx.mu * (ctx.A.T @ r)))


def iterates(ctx, x0=None):
    """Yield ``x^0, x^1, ...`` of the forward-backward iteration forever.

    The sequence is bit-identical to the one :func:`solve` walks through
    for the same context and starting point, so diagnostics can replay a
    solve without storing its iterates.
    """
    x = np.zeros(ctx.shape) if x0 is None else ctx.check_signal(x0, "x0").copy()
    while True:
        yield x
        x = _step(ctx, x, ctx.A @ x - ctx.u)


def _make_context(A, u, config, spectral_bound):
    return OperatorContext(A, u, config.tau, config.mu, spectral_bound=spectral_bound,
                           rel_tol=config.spectral_rel_tol, seed=config.seed)


def solve(A, u, config=None, x0=None, *, spectral_bound=None):
    """Run forward-backward splitting on the l2,1-regularized least squares.

    Parameters
    ----------
    A : array of shape (m, N)
    u : array of shape (m, Omega) or (m,)
    config : SolverConfig, optional
    x0 : array of shape (N, Omega), optional
        Starting point; the zero matrix by default.
    spectral_bound : float, optional
        Known upper bound on ``||A^T A||_2``; skips the power iteration.

    Returns
    -------
    SolveResult

    Raises
    ------
    ConfigurationError
        If the step size violates ``tau < 2/(mu ||A^T A||)`` or the
        dimensions disagree. Nothing is iterated in that case.
    """
    config = SolverConfig() if config is None else config
    ctx = _make_context(A, u, config, spectral_bound)
    return solve_context(ctx, config, x0)


def solve_context(ctx, config=None, x0=None):
    """:func:`solve` on an already built :class:`OperatorContext`.

    Only the stopping and recording fields of ``config`` are used; the step
    size and ``mu`` come from ``ctx``.
    """
    config = SolverConfig() if config is None else config
    x = np.zeros(ctx.shape) if x0 is None else ctx.check_signal(x0, "x0").copy()
    start = x.copy()
    start.flags.writeable = False

    record = config.record
    full = record == "full"
    objs, steps = [], []
    history = [(0, x.copy())] if full else None
    stride = 1

    track_phi = record != "none" or config.objective_tol is not None
    r = ctx.A @ x - ctx.u
    phi = _objective_from_residual(ctx, x, r) if track_phi else None
    if record != "none":
        objs.append(phi)
    termination = "max_iters"
    k = 0
    while k < config.max_iters:
        x_new = _step(ctx, x, r)
        step = float(np.linalg.norm(x_new - x))
        scale = max(1.0, float(np.linalg.norm(x)))
        r = ctx.A @ x_new - ctx.u
        k += 1
        phi_new = _objective_from_residual(ctx, x_new, r) if track_phi else None
        if record != "none":
            objs.append(phi_new)
            steps.append(step)
        if full and k % stride == 0:
            history.append((k, x_new.copy()))
            if len(history) > config.history_cap:
                history = history[::2]
                stride *= 2
        x = x_new
        if step <= config.tol * scale:
            termination = "fixed_point_tol"
            break
        if (config.objective_tol is not None
                and abs(phi - phi_new) <= config.objective_tol * max(1.0, abs(phi))):
            termination = "objective_tol"
            break
        phi = phi_new

    if full and history[-1][0] != k:
        if len(history) >= config.history_cap:
            history = history[:-1]
        history.append((k, x.copy()))

    x.flags.writeable = False
    objs = np.asarray(objs, dtype=np.float64)
    steps = np.asarray(steps, dtype=np.float64)
    objs.flags.writeable = False
    steps.flags.writeable = False
    return SolveResult(
        x=x, iterations=k, termination=termination, tau=ctx.tau, mu=ctx.mu,
        spectral_bound=ctx.spectral_bound, x0=start,
        objective_trace=objs, step_norm_trace=steps, history=history,
    )
