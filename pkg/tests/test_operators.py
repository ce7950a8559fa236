import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jsrec import (
    ConfigurationError,
    LowPrecisionWarning,
    OperatorContext,
    backward_step,
    fb_step,
    forward_step,
    gradient,
    project_tau_ball,
    spectral_norm_upper_bound,
)

from conftest import random_problem
from oracles import central_difference_gradient, prox_row

vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-100, 100))


class TestSpectralBound:
    @pytest.mark.parametrize("rel_tol", [1e-3, 1e-2])
    def test_diagonal(self, rel_tol):
        b = spectral_norm_upper_bound(np.diag([3.0, 1.0]), rel_tol=rel_tol)
        assert 9.0 <= b <= 9.0 * (1 + rel_tol)

    def test_scalar(self):
        b = spectral_norm_upper_bound(np.array([[2.0]]), rel_tol=1e-3)
        assert 4.0 <= b <= 4.0 * 1.001

    @pytest.mark.parametrize("seed", range(5))
    def test_gaussian_matches_eigendecomposition(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((20, 60)) / np.sqrt(20)
        exact = np.linalg.eigvalsh(A.T @ A)[-1]
        b = spectral_norm_upper_bound(A, rel_tol=1e-3, seed=seed)
        assert exact <= b <= exact * (1 + 1e-3)

    def test_zero_matrix(self):
        assert spectral_norm_upper_bound(np.zeros((3, 4))) == 0.0

    def test_fallback_is_still_an_upper_bound(self):
        A = np.random.default_rng(1).standard_normal((6, 9))
        with pytest.warns(LowPrecisionWarning):
            b = spectral_norm_upper_bound(A, rel_tol=1e-3, max_iters=1)
        assert b >= np.linalg.eigvalsh(A.T @ A)[-1]

    def test_deterministic(self):
        A = np.random.default_rng(2).standard_normal((7, 11))
        assert spectral_norm_upper_bound(A, seed=4) == spectral_norm_upper_bound(A, seed=4)

    def test_bad_rel_tol(self):
        with pytest.raises(ConfigurationError):
            spectral_norm_upper_bound(np.eye(2), rel_tol=1.5)


class TestContext:
    def test_auto_tau(self):
        ctx = OperatorContext(np.diag([3.0, 1.0]), np.ones((2, 1)), mu=2.0)
        assert ctx.tau == pytest.approx(1.0 / (2.0 * ctx.spectral_bound))
        assert 9.0 <= ctx.spectral_bound

    def test_step_size_bound_enforced(self):
        with pytest.raises(ConfigurationError):
            OperatorContext(np.eye(2), np.ones((2, 1)), tau=2.0)
        with pytest.raises(ConfigurationError):
            OperatorContext(np.eye(2), np.ones((2, 1)), tau=1.0, mu=2.0)
        OperatorContext(np.eye(2), np.ones((2, 1)), tau=1.9)

    @pytest.mark.parametrize("tau", [0.0, -1.0, "fast", np.nan])
    def test_invalid_tau(self, tau):
        with pytest.raises(ConfigurationError):
            OperatorContext(np.eye(2), np.ones((2, 1)), tau=tau)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            OperatorContext(np.eye(3), np.ones((2, 1)))
        ctx = OperatorContext(np.eye(2), np.ones((2, 3)))
        with pytest.raises(ConfigurationError):
            gradient(ctx, np.zeros((2, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigurationError):
            OperatorContext(np.array([[np.nan]]), np.ones((1, 1)))

    def test_immutable(self):
        A = np.eye(2)
        ctx = OperatorContext(A, np.ones((2, 1)))
        with pytest.raises(ValueError):
            ctx.A[0, 0] = 5.0
        A[0, 0] = 7.0
        assert ctx.A[0, 0] == 1.0


class TestGradientAndForward:
    def test_scalar(self):
        ctx = OperatorContext([[1.0]], [[2.0]], tau=0.5)
        np.testing.assert_array_equal(gradient(ctx, [[0.0]]), [[-2.0]])
        np.testing.assert_array_equal(forward_step(ctx, [[0.0]]), [[1.0]])

    def test_consistent_point(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((5, 8))
        x = rng.standard_normal((8, 3))
        ctx = OperatorContext(A, A @ x)
        np.testing.assert_allclose(gradient(ctx, x), 0.0, atol=1e-12)
        np.testing.assert_allclose(forward_step(ctx, x), x, atol=1e-12)

    @pytest.mark.parametrize("mu", [1.0, 3.5])
    def test_finite_differences(self, mu):
        A, u = random_problem(3)
        ctx = OperatorContext(A, u, mu=mu)
        x = np.random.default_rng(4).standard_normal((8, 3))
        phi2 = lambda z: 0.5 * mu * np.sum((A @ z - u) ** 2)
        np.testing.assert_allclose(gradient(ctx, x), central_difference_gradient(phi2, x),
                                   atol=1e-6)

    @pytest.mark.parametrize("factor", [0.5, 0.9, 1.5])
    def test_nonexpansive(self, factor):
        A, u = random_problem(5)
        lip = np.linalg.eigvalsh(A.T @ A)[-1]
        ctx = OperatorContext(A, u, tau=factor / lip, mu=1.0)
        rng = np.random.default_rng(6)
        for _ in range(100):
            v, w = rng.standard_normal((2, 8, 3)) * rng.uniform(0.1, 10)
            lhs = np.linalg.norm(forward_step(ctx, v) - forward_step(ctx, w))
            assert lhs <= np.linalg.norm(v - w) + 1e-12


class TestBackwardAndProjection:
    def test_examples(self):
        np.testing.assert_allclose(backward_step(1.0, np.array([3.0, 4.0])), [2.4, 3.2],
                                   rtol=1e-15)
        out = backward_step(1.0, np.array([0.5, 0.0]))
        assert np.array_equal(out, [0.0, 0.0]) and not np.any(np.signbit(out))
        np.testing.assert_allclose(project_tau_ball(1.0, [3.0, 4.0]), [0.6, 0.8], rtol=1e-15)
        np.testing.assert_array_equal(project_tau_ball(1.0, [0.2, 0.1]), [0.2, 0.1])

    def test_tie_goes_to_zero(self):
        out = backward_step(5.0, np.array([[3.0, 4.0], [-3.0, -4.0]]))
        assert np.array_equal(out, np.zeros((2, 2))) and not np.any(np.signbit(out))

    def test_zero_row(self):
        assert np.array_equal(backward_step(0.3, np.zeros((2, 3))), np.zeros((2, 3)))

    def test_small_rows_bitwise_zero(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((50, 4))
        out = backward_step(2.0, x)
        small = np.linalg.norm(x, axis=1) <= 2.0
        assert small.any()
        assert np.all(out[small].view(np.uint64) == 0)

    @pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
    def test_matches_prox_oracle(self, tau):
        rng = np.random.default_rng(int(tau * 10))
        for _ in range(50):
            v = rng.standard_normal(rng.integers(1, 9)) * 10 ** rng.uniform(-1.5, 1.5)
            np.testing.assert_allclose(backward_step(tau, v), prox_row(v, tau),
                                       rtol=0, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(vectors, st.floats(1e-3, 50))
    def test_identity_decomposition(self, v, tau):
        np.testing.assert_allclose(v - project_tau_ball(tau, v), backward_step(tau, v),
                                   rtol=0, atol=1e-14 * max(1.0, np.linalg.norm(v)))

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_rowwise_firm_nonexpansiveness(self, data):
        n = data.draw(st.integers(1, 6))
        v = data.draw(arrays(np.float64, n, elements=st.floats(-20, 20)))
        w = data.draw(arrays(np.float64, n, elements=st.floats(-20, 20)))
        tau = data.draw(st.floats(1e-2, 10))
        dj = backward_step(tau, v) - backward_step(tau, w)
        dp = project_tau_ball(tau, v) - project_tau_ball(tau, w)
        assert dj @ dj + dp @ dp <= (v - w) @ (v - w) + 1e-12 * max(1.0, (v - w) @ (v - w))

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(2, 6), elements=st.floats(-20, 20)),
           st.floats(1e-2, 10), st.data())
    def test_collinear(self, z, tau, data):
        i, j = data.draw(st.lists(st.integers(0, z.size - 1), min_size=2, max_size=2,
                                  unique=True))
        vecs = [z, backward_step(tau, z), project_tau_ball(tau, z)]
        scale = max(1.0, float(z @ z))
        for a in vecs:
            for b in vecs:
                assert abs(a[i] * b[j] - a[j] * b[i]) <= 1e-12 * scale

    def test_invalid_tau(self):
        with pytest.raises(ConfigurationError):
            backward_step(0.0, np.ones(2))
        with pytest.raises(ConfigurationError):
            project_tau_ball(-1.0, np.ones(2))


class TestFBStep:
    def test_identity_example(self, identity_ctx, identity_problem):
        _, _, x_star = identity_problem
        np.testing.assert_allclose(fb_step(identity_ctx, np.zeros((2, 2))), x_star, rtol=1e-15)
        np.testing.assert_allclose(fb_step(identity_ctx, x_star), x_star, atol=1e-14)

    def test_nonexpansive(self):
        A, u = random_problem(8)
        ctx = OperatorContext(A, u)
        rng = np.random.default_rng(9)
        for _ in range(100):
            v, w = rng.standard_normal((2, 8, 3)) * rng.uniform(0.1, 10)
            assert (np.linalg.norm(fb_step(ctx, v) - fb_step(ctx, w))
                    <= np.linalg.norm(v - w) + 1e-12)
