"""Empirical checks of the convergence behaviour of forward-backward splitting.

Given a reference solution ``x*`` (in practice a long run of the solver),
rows are split into ``L`` (fidelity-gradient norm strictly below one; these
rows are forced to zero after finitely many iterations) and ``E`` (gradient
norm equal to one; contains the support). A replay of the iterates then
yields the distance trace ``||x^k - x*||``, the per-row angle traces, the
projection gaps ``c_j^k`` and the empirical q-linear factor.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._core import ConfigurationError, check_matrix, row_norms, row_support
from .operators import OperatorContext, forward_step, gradient, project_tau_ball
from .solver import SolverConfig, iterates, optimality_residual, solve_context

__all__ = [
    "EstimateUnavailable",
    "PartitionReport",
    "AngularTrace",
    "ConvergenceReport",
    "DiagnosticsReport",
    "RateStudy",
    "classify_rows",
    "angle_between",
    "angular_trace",
    "finite_convergence_check",
    "convergence_report",
    "q1_estimate",
    "tau_for_lambda",
    "reduced_hessian_min_eig",
    "reference_solution",
    "replay",
    "diagnose",
    "rate_study",
]

REFERENCE_CONFIG = SolverConfig(max_iters=1_000_000, tol=1e-14, record="none")


class EstimateUnavailable(ValueError):
    """Not enough usable data to form the requested estimate."""


@dataclass(frozen=True)
class PartitionReport:
    """Split of the row indices at a (numerical) solution.

    ``omega`` is ``min_{j in L} tau (1 - ||grad_j||)`` and ``omega_alt`` the
    same margin computed as ``min_{j in L} (tau - ||G_j(x*)||)``; both are
    ``inf`` when ``L`` is empty. ``ambiguous`` lists off-support rows whose
    gradient norm fell within ``class_tol`` below one and were therefore put
    in ``E``.
    """

    L: np.ndarray
    E: np.ndarray
    omega: float
    omega_alt: float
    grad_row_norms: np.ndarray
    support: np.ndarray
    ambiguous: np.ndarray
    optimality_residual: float
    tau: float

    @property
    def E_off_support(self):
        return np.setdiff1d(self.E, self.support)

    @property
    def support_in_E(self):
        return bool(np.all(np.isin(self.support, self.E)))

    @property
    def L_off_support(self):
        return not np.any(np.isin(self.L, self.support))


def classify_rows(ctx, x_star, class_tol=1e-7, zero_tol=0.0):
    """Partition rows into ``L`` and ``E`` at ``x_star``.

    Rows with ``||grad_j|| < 1 - class_tol`` go to ``L``; everything else,
    including rows too close to the boundary to call, goes to ``E``.
    """
    x_star = ctx.check_signal(x_star, "x_star")
    res = optimality_residual(ctx, x_star)
    if res > class_tol:
        warnings.warn(
            f"x_star has optimality residual {res:.3e} > class_tol={class_tol:.1e}; "
            "the partition may be unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    g = row_norms(gradient(ctx, x_star))
    in_L = g < 1.0 - class_tol
    L = np.flatnonzero(in_L)
    E = np.flatnonzero(~in_L)
    support = row_support(x_star, zero_tol)
    # support rows sit at norm one by optimality; only zero rows can be borderline
    off = np.ones(g.size, dtype=bool)
    off[support] = False
    ambiguous = np.flatnonzero(~in_L & off & (g < 1.0))
    if L.size:
        omega = float(np.min(ctx.tau * (1.0 - g[L])))
        G = forward_step(ctx, x_star)
        omega_alt = float(np.min(ctx.tau - row_norms(G[L])))
    else:
        omega = omega_alt = np.inf
    return PartitionReport(
        L=L, E=E, omega=omega, omega_alt=omega_alt, grad_row_norms=g,
        support=support, ambiguous=ambiguous,
        optimality_residual=res, tau=ctx.tau,
    )


def angle_between(v, w):
    """Angle in ``[0, pi]`` between two nonzero vectors.

    Computed as ``2 atan2(||v' - w'||, ||v' + w'||)`` on the normalized
    vectors, which equals the arccosine of the cosine but keeps full
    relative accuracy for nearly parallel vectors.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    nv, nw = np.linalg.norm(v), np.linalg.norm(w)
    if nv == 0 or nw == 0:
        raise ValueError("angle is undefined for a zero vector")
    a, b = v / nv, w / nw
    return float(2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def _row_angles(P, Q):
    # angle per row of P vs Q; nan where either row is zero
    np_, nq = row_norms(P), row_norms(Q)
    out = np.full(P.shape[0], np.nan)
    ok = (np_ > 0) & (nq > 0)
    if np.any(ok):
        a = P[ok] / np_[ok, None]
        b = Q[ok] / nq[ok, None]
        out[ok] = 2.0 * np.arctan2(row_norms(a - b), row_norms(a + b))
    return out


@dataclass
class AngularTrace:
    """Per-row angle traces and projection gaps along a run.

    ``theta[j]`` holds one value per iterate (``nan`` where undefined). For
    ``j`` in the support it is the angle between ``x_j^k`` and ``x*_j``; for
    the remaining rows of ``E`` it is the angle between the projected
    gradient steps ``P(G_j(x^k))`` and ``P(G_j(x*))``.
    """

    rows: np.ndarray
    theta: np.ndarray
    cbar: np.ndarray

    def tail(self, j, n=10):
        """Last ``n`` defined values of the trace of row ``j``."""
        t = self.theta[:, int(np.flatnonzero(self.rows == j)[0])]
        t = t[~np.isnan(t)]
        return t[-n:]

    def max_tail(self, n=10):
        if self.rows.size == 0:
            return 0.0
        tails = [self.tail(j, n) for j in self.rows]
        return max((float(t.max()) for t in tails if t.size), default=np.nan)


@dataclass
class ConvergenceReport:
    """Everything measured along one replayed run."""

    fejer_trace: np.ndarray
    angular: AngularTrace
    x0_distance_sq: float
    finite_conv_bound: float
    L_nonzero_count: int
    L_zero_iteration: int
    q1_measured: float | None
    q1_bound: float | None = None

    @property
    def cbar_trace(self):
        return self.angular.cbar

    @property
    def cbar_sum(self):
        return float(self.angular.cbar.sum())

    @property
    def finite_conv_holds(self):
        return self.L_nonzero_count <= self.finite_conv_bound

    def fejer_monotone(self, slack=1e-10):
        return bool(np.all(np.diff(self.fejer_trace) <= slack))


def _as_arrays(history):
    for item in history:
        yield item[1] if isinstance(item, tuple) else item


def _walk(ctx, history, x_star, partition):
    x_star = ctx.check_signal(x_star, "x_star")
    P_star = project_tau_ball(ctx.tau, forward_step(ctx, x_star))
    supp = partition.support
    off = partition.E_off_support
    rows = np.concatenate([supp, off]).astype(int)
    L = partition.L

    fejer, cbar, thetas = [], [], []
    count, last_nonzero = 0, -1
    for k, x in enumerate(_as_arrays(history)):
        d = x - x_star
        fejer.append(float(np.sqrt(np.sum(d * d))))
        P = project_tau_ball(ctx.tau, forward_step(ctx, x))
        dp = P - P_star
        cbar.append(float(np.sum(dp * dp)))
        thetas.append(np.concatenate([_row_angles(x[supp], x_star[supp]),
                                      _row_angles(P[off], P_star[off])]))
        if L.size and np.any(row_norms(x[L]) > 0):
            count += 1
            last_nonzero = k
    if not fejer:
        raise ConfigurationError("history is empty")
    theta = np.array(thetas).reshape(len(fejer), rows.size)
    return (np.array(fejer), AngularTrace(rows=rows, theta=theta, cbar=np.array(cbar)),
            count, last_nonzero + 1)


def angular_trace(ctx, history, x_star, partition):
    """Angle traces and ``c_j^k`` sums along ``history`` (consecutive iterates)."""
    return _walk(ctx, history, x_star, partition)[1]


def _finite_bound(x0, x_star, omega):
    d = x0 - x_star
    dist_sq = float(np.sum(d * d))
    if not np.isfinite(omega):
        return dist_sq, 0.0
    return dist_sq, dist_sq / omega**2


def finite_convergence_check(history, x_star, partition, x0=None):
    """Count the iterates with a nonzero row in ``L`` and compare to the bound.

    Returns ``(bound, achieved_at, holds)`` where ``bound`` is
    ``||x0 - x*||^2 / omega^2`` (0 when ``L`` is empty), ``achieved_at`` is
    the number of iterates in ``history`` having some nonzero ``L`` row, and
    ``holds`` is ``achieved_at <= bound``. ``x0`` defaults to the first
    element of ``history``.
    """
    x_star = check_matrix(x_star, "x_star")
    arrays = _as_arrays(history)
    first = next(arrays, None)
    if first is None:
        raise ConfigurationError("history is empty")
    x0 = first if x0 is None else check_matrix(x0, "x0")
    _, bound = _finite_bound(x0, x_star, partition.omega)
    L = partition.L
    achieved = 0
    if L.size:
        for x in itertools.chain([first], arrays):
            if np.any(row_norms(x[L]) > 0):
                achieved += 1
    return bound, achieved, achieved <= bound


def convergence_report(ctx, history, x_star, partition, *, window=20, floor=1e-13,
                       q1_bound=None):
    """One pass over ``history`` (starting at ``x^0``) collecting all traces."""
    arrays = _as_arrays(history)
    first = next(arrays, None)
    if first is None:
        raise ConfigurationError("history is empty")
    fejer, ang, count, zero_it = _walk(ctx, itertools.chain([first], arrays), x_star, partition)
    dist_sq, bound = _finite_bound(first, x_star, partition.omega)
    try:
        q1 = q1_estimate(fejer, window=window, floor=floor)
    except EstimateUnavailable:
        q1 = None
    return ConvergenceReport(
        fejer_trace=fejer, angular=ang, x0_distance_sq=dist_sq,
        finite_conv_bound=bound, L_nonzero_count=count, L_zero_iteration=zero_it,
        q1_measured=q1, q1_bound=q1_bound,
    )


def q1_estimate(fejer_trace, window=20, floor=1e-13, min_entries=10):
    """Largest of the last ``window`` error ratios ``e_{k+1} / e_k``.

    Only ratios whose two errors both exceed ``floor`` are used; fewer than
    ``min_entries`` such errors raises :class:`EstimateUnavailable`.
    """
    e = np.asarray(fejer_trace, dtype=np.float64)
    if np.count_nonzero(e > floor) < min_entries:
        raise EstimateUnavailable(
            f"need at least {min_entries} errors above {floor:g} to estimate q1")
    ok = (e[:-1] > floor) & (e[1:] > floor)
    ratios = e[1:][ok] / e[:-1][ok]
    if ratios.size == 0:
        raise EstimateUnavailable("no consecutive errors above the floor")
    return float(ratios[-window:].max())


def tau_for_lambda(lam, lam_max):
    """Step size tuned to a lower curvature ``lam`` and the predicted q1 bound.

    With ``gamma = lam_max / lam`` the step is
    ``gamma / (gamma + 1) * 2 / lam_max`` and the bound on the q1-factor is
    ``(gamma - 1) / (gamma + 1)``.
    """
    if not 0 < lam <= lam_max:
        raise ConfigurationError("need 0 < lambda <= lambda_max")
    gamma = lam_max / lam
    return gamma / (gamma + 1.0) * 2.0 / lam_max, (gamma - 1.0) / (gamma + 1.0)


def reduced_hessian_min_eig(A, E, mu=1.0, cap=2000):
    """Smallest eigenvalue of ``mu * (A^T A)[E, E]``."""
    A = check_matrix(A, "A")
    E = np.asarray(E, dtype=int)
    if E.size == 0:
        raise EstimateUnavailable("E is empty")
    if E.size > cap:
        raise EstimateUnavailable(f"|E| = {E.size} exceeds the dense eigensolver cap {cap}")
    AE = A[:, E]
    return float(np.linalg.eigvalsh(mu * (AE.T @ AE))[0])


def reference_solution(ctx, x0=None, config=REFERENCE_CONFIG):
    """Long-horizon run used as the stand-in for the exact limit ``x*``."""
    return solve_context(ctx, config, x0)


def replay(ctx, x0, n_iterations):
    """The iterates ``x^0 .. x^n`` of a run, regenerated lazily."""
    return itertools.islice(iterates(ctx, x0), n_iterations + 1)


@dataclass
class DiagnosticsReport:
    """A solve, its long-horizon reference and everything measured in between."""

    tau: float
    mu: float
    solve_iterations: int
    solve_termination: str
    reference_iterations: int
    reference_termination: str
    optimality_residual: float
    distance_to_reference: float
    partition: PartitionReport
    convergence: ConvergenceReport
    x: np.ndarray = field(repr=False)
    x_ref: np.ndarray = field(repr=False)

    def checks(self, angle_tol=1e-6, tail=10):
        """Pass/fail flags of the convergence properties."""
        p, c = self.partition, self.convergence
        return {
            "support_in_E": p.support_in_E,
            "L_off_support": p.L_off_support,
            "omega_agree": (not np.isfinite(p.omega)) or abs(p.omega - p.omega_alt) <= 1e-10,
            "finite_convergence": c.finite_conv_holds,
            "L_zero_iteration_within_bound": c.L_zero_iteration <= c.finite_conv_bound,
            "angular_tail": not (c.angular.max_tail(tail) > angle_tol),
            "cbar_summable": c.cbar_sum <= c.x0_distance_sq + 1e-8,
            "fejer_monotone": c.fejer_monotone(),
        }


def diagnose(ctx, config=None, x0=None, reference_config=REFERENCE_CONFIG, class_tol=1e-7):
    """Solve, compute a long-horizon reference, and measure the run against it.

    The reference continues the same iteration from the same ``x0``, so the
    solve is a prefix of it. Traces cover the full reference horizon.
    """
    config = SolverConfig() if config is None else config
    result = solve_context(ctx, config.replace(record="none"), x0)
    ref = reference_solution(ctx, x0, reference_config)
    part = classify_rows(ctx, ref.x, class_tol=class_tol)
    conv = convergence_report(ctx, replay(ctx, result.x0, ref.iterations), ref.x, part)
    d = result.x - ref.x
    return DiagnosticsReport(
        tau=ctx.tau, mu=ctx.mu,
        solve_iterations=result.iterations, solve_termination=result.termination,
        reference_iterations=ref.iterations, reference_termination=ref.termination,
        optimality_residual=optimality_residual(ctx, result.x),
        distance_to_reference=float(np.sqrt(np.sum(d * d))),
        partition=part, convergence=conv, x=result.x, x_ref=ref.x,
    )


@dataclass
class RateStudy:
    """Measured versus predicted q-linear factor for a tuned step size."""

    E: np.ndarray
    lambda_min_E: float
    lambda_max: float
    gamma: float
    tau: float
    q1_bound: float
    q1_measured: float | None
    slack: float
    iterations: int

    @property
    def holds(self):
        return self.q1_measured is not None and self.q1_measured <= self.q1_bound + self.slack


def rate_study(A, u, mu=1.0, lambda_min_E="auto", slack=0.05, x0=None,
               reference_config=REFERENCE_CONFIG, window=20, floor=1e-13,
               class_tol=1e-7, eig_cap=2000):
    """Run with ``tau`` tuned to the reduced Hessian and measure q1.

    ``E`` comes from a reference solve with the default step. When
    ``lambda_min_E`` is ``"auto"`` it is the smallest eigenvalue of
    ``mu * H[E, E]``; ``lambda_max`` is the largest eigenvalue of ``mu * H``.
    """
    ctx0 = OperatorContext(A, u, "auto", mu)
    ref0 = reference_solution(ctx0, x0, reference_config)
    part = classify_rows(ctx0, ref0.x, class_tol=class_tol)
    N = ctx0.A.shape[1]
    if N > eig_cap:
        raise EstimateUnavailable(f"N = {N} exceeds the dense eigensolver cap {eig_cap}")
    lam_max = float(np.linalg.eigvalsh(ctx0.mu * (ctx0.A.T @ ctx0.A))[-1])
    if lambda_min_E == "auto":
        lam_min = reduced_hessian_min_eig(ctx0.A, part.E, ctx0.mu, cap=eig_cap)
    else:
        lam_min = float(lambda_min_E)
    if not lam_min > 0:
        raise EstimateUnavailable(f"lambda_min(H_EE) = {lam_min:.3e} is not positive")
    tau, bound = tau_for_lambda(lam_min, lam_max)
    ctx = ctx0.with_tau(tau)
    ref = reference_solution(ctx, x0, reference_config)
    fejer = np.array([float(np.linalg.norm(x - ref.x))
                      for x in replay(ctx, ref.x0, ref.iterations)])
    try:
        q1 = q1_estimate(fejer, window=window, floor=floor)
    except EstimateUnavailable:
        q1 = None
    return RateStudy(E=part.E, lambda_min_E=lam_min, lambda_max=lam_max,
                     gamma=lam_max / lam_min, tau=tau, q1_bound=bound,
                     q1_measured=q1, slack=slack, iterations=ref.iterations)
