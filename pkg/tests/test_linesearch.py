import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pncg.linesearch import (
    LineSearchParams, LineSearchStatus, NotDescentError, ray, strong_wolfe_search, wolfe_conditions_hold,
)


def from_callables(f, df):
    return lambda a: (f(a), df(a))


def wolfe_set_on_grid(f, df, c1, c2, hi, step):
    grid = np.arange(step, hi, step)
    phi0, d0 = f(0.0), df(0.0)
    ok = (f(grid) <= phi0 + c1 * grid * d0) & (np.abs(df(grid)) <= c2 * abs(d0))
    return grid[ok]


class TestBasics:
    def test_exact_minimizer_accepted(self):
        res = strong_wolfe_search(from_callables(lambda a: 0.5 * (1 - a) ** 2, lambda a: a - 1), 0.5, -1.0)
        assert res.status is LineSearchStatus.SUCCESS
        assert res.alpha == 1.0 and res.evals == 1

    def test_not_descent(self):
        with pytest.raises(NotDescentError):
            strong_wolfe_search(from_callables(lambda a: a, lambda a: 1.0), 0.0, 1.0)

    def test_zero_slope_not_descent(self):
        with pytest.raises(NotDescentError):
            strong_wolfe_search(from_callables(lambda a: 1.0, lambda a: 0.0), 1.0, 0.0)

    @pytest.mark.parametrize("kwargs", [dict(c1=0.5, c2=0.1), dict(c1=0.0), dict(c2=1.0), dict(alpha0=0.0),
                                        dict(max_iters=0), dict(f_noise=-1.0)])
    def test_param_validation(self, kwargs):
        with pytest.raises(ValueError):
            LineSearchParams(**kwargs)

    def test_defaults(self):
        p = LineSearchParams()
        assert (p.c1, p.c2, p.alpha0, p.max_iters, p.f_noise) == (1e-4, 1e-2, 1.0, 20, 0.0)


class TestWolfeSet:
    def test_quartic_grid_scan(self):
        f = lambda a: 0.25 * (a - 2.0) ** 4
        df = lambda a: (a - 2.0) ** 3
        params = LineSearchParams()
        res = strong_wolfe_search(from_callables(f, df), f(0.0), df(0.0), params)
        assert res.status is LineSearchStatus.SUCCESS
        step = 1e-4
        admissible = wolfe_set_on_grid(f, df, params.c1, params.c2, 6.0, step)
        assert admissible.size > 0
        assert np.min(np.abs(admissible - res.alpha)) <= step
        assert wolfe_conditions_hold(f(0.0), df(0.0), res.alpha, f(res.alpha), df(res.alpha), params.c1, params.c2)

    def test_expansion_needed(self):
        f = lambda a: (a - 10.0) ** 2
        df = lambda a: 2 * (a - 10.0)
        res = strong_wolfe_search(from_callables(f, df), f(0.0), df(0.0))
        assert res.status is LineSearchStatus.SUCCESS
        assert abs(df(res.alpha)) <= 1e-2 * abs(df(0.0))
        assert res.alpha > 1.0

    def test_extrapolation_reaches_far_minimizer(self):
        # the cubic through two trials of a quadratic is the quadratic itself, so
        # only the growth cap (4x per trial) stands between alpha0 = 1 and alpha = 10
        f = lambda a: (a - 10.0) ** 2
        df = lambda a: 2 * (a - 10.0)
        res = strong_wolfe_search(from_callables(f, df), f(0.0), df(0.0))
        assert res.status is LineSearchStatus.SUCCESS
        assert res.evals == 3
        assert res.alpha == pytest.approx(10.0, rel=1e-12)

    def test_growth_is_bounded(self):
        seen = []

        def phi(a):
            seen.append(a)
            return -a, -1.0

        strong_wolfe_search(phi, 0.0, -1.0, LineSearchParams(max_iters=6))
        ratios = np.array(seen[1:]) / np.array(seen[:-1])
        assert np.all((ratios >= 1.1) & (ratios <= 4.0))

    @settings(max_examples=200, deadline=None)
    @given(
        center=st.floats(0.01, 50.0),
        curvature=st.floats(0.01, 100.0),
        wiggle=st.floats(0.0, 0.9),
        freq=st.floats(0.1, 5.0),
    )
    def test_success_passes_independent_recheck(self, center, curvature, wiggle, freq):
        # convex along the ray with a bounded oscillation so minima are not trivial
        f = lambda a: 0.5 * curvature * (a - center) ** 2 + wiggle * curvature * math.cos(freq * a) / freq ** 2
        df = lambda a: curvature * (a - center) - wiggle * curvature * math.sin(freq * a) / freq
        d0 = df(0.0)
        if not d0 < 0:
            return
        params = LineSearchParams()
        res = strong_wolfe_search(from_callables(f, df), f(0.0), d0, params)
        assert res.evals <= params.max_iters
        if res.status is LineSearchStatus.SUCCESS:
            assert wolfe_conditions_hold(f(0.0), d0, res.alpha, f(res.alpha), df(res.alpha), params.c1, params.c2)
        elif res.status is LineSearchStatus.BUDGET_EXHAUSTED:
            assert f(res.alpha) < f(0.0)

    def test_deterministic(self):
        f = lambda a: 0.25 * (a - 2.0) ** 4 + math.sin(3 * a)
        df = lambda a: (a - 2.0) ** 3 + 3 * math.cos(3 * a)
        runs = [strong_wolfe_search(from_callables(f, df), f(0.0), df(0.0)) for _ in range(3)]
        assert len({(r.alpha, r.evals, r.status) for r in runs}) == 1


class TestBudget:
    def test_budget_returns_best_decrease(self):
        # alpha = 1 decreases phi but the slope is still steep there
        f = lambda a: (a - 10.0) ** 2
        df = lambda a: 2 * (a - 10.0)
        res = strong_wolfe_search(from_callables(f, df), f(0.0), df(0.0), LineSearchParams(max_iters=1))
        assert res.status is LineSearchStatus.BUDGET_EXHAUSTED
        assert res.alpha == 1.0 and res.evals == 1

    def test_no_decrease(self):
        f = lambda a: -1e-3 * a + a ** 2
        df = lambda a: -1e-3 + 2 * a
        res = strong_wolfe_search(from_callables(f, df), 0.0, -1e-3, LineSearchParams(max_iters=2))
        assert res.status is LineSearchStatus.NO_DECREASE
        assert res.alpha == 0.0 and res.evals == 2

    def test_exact_eval_count(self):
        calls = []

        def phi(a):
            calls.append(a)
            return 0.25 * (a - 2.0) ** 4, (a - 2.0) ** 3

        res = strong_wolfe_search(phi, 4.0, -8.0)
        assert res.evals == len(calls)


class TestRoundingTolerance:
    @staticmethod
    def noisy_quadratic(noise):
        # the true decrease along the ray is 1e-14, below a strictly positive value error
        def f(a):
            return 1.0 + 1e-14 * ((a - 1.0) ** 2 - 1.0) + noise * (1.0 + 0.5 * math.sin(1e6 * a))

        def df(a):
            return 2e-14 * (a - 1.0)

        return f, df

    def test_noise_defeats_exact_comparisons(self):
        f, df = self.noisy_quadratic(1e-12)
        res = strong_wolfe_search(from_callables(f, df), 1.0, df(0.0), LineSearchParams())
        assert res.status is LineSearchStatus.NO_DECREASE

    def test_tolerance_lets_curvature_decide(self):
        f, df = self.noisy_quadratic(1e-12)
        res = strong_wolfe_search(from_callables(f, df), 1.0, df(0.0), LineSearchParams(f_noise=1e-11))
        assert res.status is LineSearchStatus.SUCCESS
        assert abs(df(res.alpha)) <= 1e-2 * abs(df(0.0))

    def test_flat_values_extrapolate_on_slopes(self):
        # values carry no information; the slope is linear with its root at 30
        df = lambda a: 2e-14 * (a - 30.0)
        res = strong_wolfe_search(lambda a: (1.0, df(a)), 1.0, df(0.0), LineSearchParams(f_noise=1e-11))
        assert res.status is LineSearchStatus.SUCCESS
        assert res.evals == 4  # 1, 4, 16, then the secant root
        assert res.alpha == pytest.approx(30.0, rel=1e-12)

    def test_recheck_with_tolerance(self):
        assert not wolfe_conditions_hold(1.0, -1.0, 1e-9, 1.0 + 1e-13, 0.0, 1e-4, 1e-2)
        assert wolfe_conditions_hold(1.0, -1.0, 1e-9, 1.0 + 1e-13, 0.0, 1e-4, 1e-2, f_noise=1e-12)


class TestRay:
    def test_values_and_cache(self):
        a = np.diag([1.0, 2.0])
        fg = lambda x: (0.5 * x @ a @ x, a @ x)
        x = np.array([1.0, 1.0])
        p = np.array([-1.0, 0.0])
        phi = ray(fg, x, p)
        val, der = phi(0.5)
        assert val == pytest.approx(0.5 * (0.25 + 2.0))
        assert der == pytest.approx(-0.5)
        np.testing.assert_array_equal(phi.cache[0.5][1], a @ np.array([0.5, 1.0]))
