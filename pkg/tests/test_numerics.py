import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duelcast.errors import LeftLocalBranch, NoConvergence, SingularJacobian
from duelcast.numerics import (
    TimeGrid,
    _householder_complement,
    central_difference,
    derivative_series,
    newton_solve,
    orthonormal_complement,
    rk4_step,
)


def span_projector(rows):
    rows = np.asarray(rows, dtype=float)
    return rows.T @ rows


class TestTimeGrid:
    def test_times(self):
        grid = TimeGrid(1.0, 0.5, 4)
        assert np.allclose(grid.times(), [1.0, 1.5, 2.0, 2.5])
        assert grid.t_end == 2.5

    def test_index_of(self):
        grid = TimeGrid(0.0, 0.01, 101)
        assert grid.index_of(0.37) == 37
        with pytest.raises(ValueError):
            grid.index_of(0.375)
        with pytest.raises(ValueError):
            grid.index_of(1.01)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.0, 5)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.1, 0)


class TestOrthonormalComplement:
    def test_unit_axis(self):
        rows = orthonormal_complement(np.array([0.0, 0.0, 1.0]))
        expected = span_projector([[1, 0, 0], [0, 1, 0]])
        assert np.allclose(span_projector(rows), expected, atol=1e-14)

    def test_generic_vector(self):
        v = np.array([0.5, -0.25, 1.0])
        rows = orthonormal_complement(v)
        assert np.max(np.abs(rows @ v)) <= 1e-12 * np.linalg.norm(v)
        assert np.max(np.abs(rows @ rows.T - np.eye(2))) <= 1e-12

    def test_zero_vector_keeps_prev(self):
        prev = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        rows = orthonormal_complement(np.zeros(3), prev)
        assert np.array_equal(rows, prev)

    def test_zero_vector_fallback(self):
        rows = orthonormal_complement(np.zeros(3))
        unit = np.zeros(3)
        unit[-1] = 1.0
        assert np.array_equal(rows, _householder_complement(unit))
        assert np.max(np.abs(rows @ unit)) <= 1e-15

    @given(
        st.lists(
            st.floats(min_value=-10, max_value=10, allow_nan=False),
            min_size=3,
            max_size=6,
        ).filter(lambda xs: np.linalg.norm(xs) > 1e-6)
    )
    def test_invariants_random(self, xs):
        v = np.asarray(xs)
        rows = orthonormal_complement(v)
        assert np.max(np.abs(rows @ v)) <= 1e-12 * max(1.0, np.linalg.norm(v))
        assert np.max(np.abs(rows @ rows.T - np.eye(len(xs) - 1))) <= 1e-12

    def test_alignment_continuity(self):
        # Rotating direction: aligned steps stay O(h); the raw Householder
        # basis flips branches somewhere on the sweep, so alignment is
        # load-bearing, not cosmetic.
        taus = np.linspace(0.0, 2.0 * np.pi, 400)
        h = taus[1] - taus[0]
        prev = None
        prev_raw = None
        max_aligned = 0.0
        max_raw = 0.0
        for tau in taus:
            v = np.array([math.cos(tau), math.sin(tau), 1.0])
            cur = orthonormal_complement(v, prev)
            if prev is not None:
                max_aligned = max(max_aligned, np.linalg.norm(cur - prev))
            prev = cur
            raw = _householder_complement(v)
            if prev_raw is not None:
                max_raw = max(max_raw, np.linalg.norm(raw - prev_raw))
            prev_raw = raw
        assert max_aligned <= 1.0 * h  # observed C ~= 0.71
        assert max_raw > 10.0 * h

    def test_prev_alignment_tracks(self):
        v1 = np.array([0.5, -0.25, 1.0])
        rows1 = orthonormal_complement(v1)
        v2 = v1 + np.array([1e-3, -2e-3, 1e-3])
        rows2 = orthonormal_complement(v2, rows1)
        assert np.linalg.norm(rows2 - rows1) < 1e-2
        assert np.max(np.abs(rows2 @ v2)) <= 1e-12 * np.linalg.norm(v2)


class TestNewton:
    def test_affine_one_iteration(self):
        a = np.array([[2.0, 1.0], [0.5, 3.0]])
        b = np.array([1.0, -2.0])
        result = newton_solve(
            residual=lambda u: a @ u - b,
            jacobian=lambda u: a,
            seed=np.zeros(2),
            tol=1e-12,
            max_iter=10,
            trust_radius=100.0,
        )
        assert result.iterations == 1
        assert np.max(np.abs(a @ result.u - b)) <= 1e-12

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_affine_one_iteration_random(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 5))
        a = rng.normal(size=(d, d)) + 2.0 * d * np.eye(d)  # diagonally dominant
        b = rng.normal(size=d)
        result = newton_solve(
            residual=lambda u: a @ u - b,
            jacobian=lambda u: a,
            seed=rng.normal(size=d),
            tol=1e-12,
            max_iter=10,
            trust_radius=1e6,
        )
        assert result.iterations == 1
        assert np.max(np.abs(a @ result.u - b)) <= 1e-12

    def test_scalar_square_root_iterates(self):
        # Hand-computed Newton path for u^2 = 4 from 3: 13/6, then 313/156.
        visited = []

        def residual(u):
            visited.append(float(u[0]))
            return np.array([u[0] ** 2 - 4.0])

        result = newton_solve(
            residual=residual,
            jacobian=lambda u: np.array([[2.0 * u[0]]]),
            seed=np.array([3.0]),
            tol=1e-10,
            max_iter=25,
            trust_radius=10.0,
        )
        assert result.u[0] == pytest.approx(2.0, abs=1e-10)
        accepted = visited[1:3]  # seed eval first, then the accepted candidates
        assert accepted[0] == pytest.approx(13.0 / 6.0, rel=1e-15)
        assert accepted[1] == pytest.approx(313.0 / 156.0, rel=1e-15)

    def test_zero_jacobian_singular(self):
        with pytest.raises(SingularJacobian):
            newton_solve(
                residual=lambda u: np.array([1.0]),
                jacobian=lambda u: np.array([[0.0]]),
                seed=np.array([0.0]),
                tol=1e-10,
                max_iter=5,
                trust_radius=1.0,
            )

    def test_trust_radius_violation(self):
        with pytest.raises(LeftLocalBranch):
            newton_solve(
                residual=lambda u: np.array([u[0] ** 2 - 4.0]),
                jacobian=lambda u: np.array([[2.0 * u[0]]]),
                seed=np.array([3.0]),
                tol=1e-10,
                max_iter=25,
                trust_radius=0.5,
            )

    def test_no_convergence(self):
        with pytest.raises(NoConvergence):
            newton_solve(
                residual=lambda u: np.array([u[0] ** 2 - 4.0]),
                jacobian=lambda u: np.array([[2.0 * u[0]]]),
                seed=np.array([50.0]),
                tol=1e-14,
                max_iter=2,
                trust_radius=1e9,
            )

    def test_converged_seed_returned_unchanged(self):
        seed = np.array([2.0])
        result = newton_solve(
            residual=lambda u: np.array([u[0] ** 2 - 4.0]),
            jacobian=lambda u: np.array([[2.0 * u[0]]]),
            seed=seed,
            tol=1e-10,
            max_iter=5,
            trust_radius=1.0,
        )
        assert result.iterations == 0
        assert result.u[0] == 2.0


class TestRk4:
    def test_zero_rhs(self):
        phi = np.array([1.0, -2.0])
        out = rk4_step(lambda t, p: np.zeros(2), 0.0, phi, 0.1)
        assert np.array_equal(out, phi)

    def test_constant_rhs_exact(self):
        out = rk4_step(lambda t, p: np.ones(1), 0.0, np.array([5.0]), 0.25)
        assert out[0] == 5.25

    def test_exponential_one_step(self):
        # Hand-evaluated stages for phi' = phi, phi=1, h=0.1.
        h = 0.1
        k1 = 1.0
        k2 = 1.0 + 0.5 * h * k1
        k3 = 1.0 + 0.5 * h * k2
        k4 = 1.0 + h * k3
        expected = 1.0 + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out = rk4_step(lambda t, p: p, 0.0, np.array([1.0]), h)
        assert out[0] == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(1.1051708333333333, abs=1e-13)
        assert abs(out[0] - math.e ** 0.1) < 2e-7

    def test_global_error_exponential(self):
        phi = np.array([1.0])
        for k in range(100):
            phi = rk4_step(lambda t, p: p, 0.01 * k, phi, 0.01)
        assert abs(phi[0] - math.e) / math.e <= 1e-8

    def test_non_finite_detection(self):
        from duelcast.errors import NonFiniteState

        with np.errstate(over="ignore"), pytest.raises(NonFiniteState):
            rk4_step(lambda t, p: p * 1e308, 0.0, np.array([1e308]), 1.0)


class TestCentralDifference:
    @given(
        st.floats(min_value=-3, max_value=3, allow_nan=False),
        st.floats(min_value=-3, max_value=3, allow_nan=False),
        st.floats(min_value=-3, max_value=3, allow_nan=False),
        st.integers(min_value=1, max_value=8),
    )
    @settings(max_examples=50)
    def test_exact_on_quadratics(self, a, b, c, k):
        h = 0.1
        t = h * np.arange(10)
        samples = a * t**2 + b * t + c
        got = central_difference(samples, h, k)
        expected = 2 * a * t[k] + b
        assert got == pytest.approx(expected, abs=1e-10 * max(1.0, abs(a), abs(b)))

    def test_constant_zero(self):
        samples = np.full(7, 3.25)
        for k in range(7):
            assert central_difference(samples, 0.05, k) == 0.0

    def test_cubic_truncation_error(self):
        # s(t) = t^3 sampled at h=0.1 around t=0: estimate is exactly 0.01.
        samples = np.array([(-0.1) ** 3, 0.0, 0.1**3])
        assert central_difference(samples, 0.1, 1) == pytest.approx(0.01, rel=1e-12)

    def test_one_sided_endpoints(self):
        h = 0.1
        t = h * np.arange(5)
        samples = 2.0 * t
        assert central_difference(samples, h, 0) == pytest.approx(2.0, rel=1e-12)
        assert central_difference(samples, h, 4) == pytest.approx(2.0, rel=1e-12)

    def test_series_matches_pointwise(self):
        rng = np.random.default_rng(3)
        samples = rng.normal(size=(9, 2))
        series = derivative_series(samples, 0.2)
        for k in range(9):
            for j in range(2):
                assert series[k, j] == central_difference(samples[:, j], 0.2, k)
