import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pncg.quadratic import (
    QuadraticProblem, check_spd_operator, exact_quadratic_linesearch, pcg_solve, random_spd, sgs_apply,
    sgs_preconditioner,
)


def identity(r):
    return r


def wishart_spd(n, rng):
    # B B^T + n I: the usual well-conditioned random SPD matrix
    b = rng.standard_normal((n, n))
    return QuadraticProblem(b @ b.T + n * np.eye(n), rng.standard_normal(n))


class TestProblem:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            QuadraticProblem(np.array([[2.0, 1.0], [0.0, 2.0]]), np.zeros(2))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            QuadraticProblem(np.diag([1.0, -1.0]), np.zeros(2))

    def test_rejects_shape(self):
        with pytest.raises(ValueError):
            QuadraticProblem(np.eye(2), np.zeros(3))

    def test_value_and_gradient(self):
        q = QuadraticProblem(np.diag([2.0, 4.0]), np.array([1.0, 1.0]))
        x = np.array([1.0, 2.0])
        assert q.value(x) == pytest.approx(0.5 * (2 + 16) - 3)
        np.testing.assert_array_equal(q.gradient(x), [1.0, 7.0])

    def test_random_spd_spectrum(self):
        q = random_spd(10, np.random.default_rng(0), cond=50.0)
        ev = np.linalg.eigvalsh(q.A)
        assert ev.min() == pytest.approx(1.0, rel=1e-10)
        assert ev.max() == pytest.approx(50.0, rel=1e-10)


class TestPcg:
    def test_identity_matrix_one_step(self):
        rng = np.random.default_rng(1)
        q = QuadraticProblem(np.eye(10), rng.standard_normal(10))
        its = pcg_solve(q, identity, rng.standard_normal(10), 5)
        np.testing.assert_allclose(its[1], q.b, rtol=1e-14, atol=1e-14)

    def test_exact_inverse_preconditioner_one_step(self):
        rng = np.random.default_rng(2)
        q = random_spd(10, rng)
        its = pcg_solve(q, lambda r: np.linalg.solve(q.A, r), rng.standard_normal(10), 3)
        sol = q.solution()
        assert np.linalg.norm(its[1] - sol) <= 1e-10 * np.linalg.norm(sol)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_spd_matches_direct_solve(self, seed):
        rng = np.random.default_rng(seed)
        q = wishart_spd(10, rng)
        its = pcg_solve(q, identity, np.zeros(10), 10)
        sol = np.linalg.solve(q.A, q.b)
        assert np.linalg.norm(its[-1] - sol) <= 1e-10 * np.linalg.norm(sol)

    def test_sgs_preconditioned_matches_direct_solve(self):
        rng = np.random.default_rng(7)
        q = wishart_spd(10, rng)
        its = pcg_solve(q, lambda r: sgs_apply(q.A, r), np.zeros(10), 10)
        sol = q.solution()
        assert np.linalg.norm(its[-1] - sol) <= 1e-10 * np.linalg.norm(sol)

    def test_stops_at_exact_solution(self):
        q = QuadraticProblem(np.eye(3), np.ones(3))
        its = pcg_solve(q, identity, np.ones(3), 5)
        assert len(its) == 1

    def test_rejects_non_spd_operator(self):
        q = random_spd(4, np.random.default_rng(3))
        with pytest.raises(ValueError):
            pcg_solve(q, lambda r: -r, np.zeros(4), 2)


class TestSgs:
    def test_diagonal(self):
        d = np.array([2.0, 4.0, 5.0])
        r = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(sgs_apply(np.diag(d), r), r / d, rtol=1e-15)

    def test_zero_residual(self):
        q = random_spd(5, np.random.default_rng(4))
        assert not np.any(sgs_apply(q.A, np.zeros(5)))

    def test_explicit_matrix_oracle(self):
        q = random_spd(6, np.random.default_rng(5))
        a = q.A
        d = np.diag(np.diag(a))
        low = np.tril(a, -1)
        m = (d + low) @ np.linalg.inv(d) @ (d + low.T)
        r = np.random.default_rng(6).standard_normal(6)
        np.testing.assert_allclose(sgs_apply(a, r), np.linalg.solve(m, r), rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_spd_probe_n8(self, seed):
        q = random_spd(8, np.random.default_rng(seed))
        check_spd_operator(lambda r: sgs_apply(q.A, r), 8)

    def test_zero_diagonal(self):
        with pytest.raises(ValueError):
            sgs_apply(np.array([[0.0, 1.0], [1.0, 2.0]]), np.ones(2))

    def test_preconditioner_fixed_point(self):
        q = random_spd(6, np.random.default_rng(8))
        sol = q.solution()
        np.testing.assert_allclose(sgs_preconditioner(q)(sol), sol, rtol=1e-10, atol=1e-12)


class TestExactLineSearch:
    def test_identity_example(self):
        q = QuadraticProblem(np.eye(3), np.zeros(3))
        e1 = np.array([1.0, 0.0, 0.0])
        assert exact_quadratic_linesearch(q, e1, -e1) == 1.0

    def test_orthogonal_direction(self):
        q = QuadraticProblem(np.eye(2), np.zeros(2))
        assert exact_quadratic_linesearch(q, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_zero_direction(self):
        q = QuadraticProblem(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            exact_quadratic_linesearch(q, np.ones(2), np.zeros(2))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_grid_scan(self, seed):
        rng = np.random.default_rng(seed)
        q = random_spd(6, rng)
        x, p = rng.standard_normal(6), rng.standard_normal(6)
        alpha = exact_quadratic_linesearch(q, x, p)
        step = 1e-3
        grid = np.arange(alpha - 5.0, alpha + 5.0, step)
        vals = [q.value(x + a * p) for a in grid]
        assert abs(grid[int(np.argmin(vals))] - alpha) <= step
