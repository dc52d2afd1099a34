from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import binom

import twoscale as ts
from twoscale.errors import OracleError
from twoscale.oracle import build_full_chain, exact_expectation, exact_stationary
from twoscale.refinement import Observable

from helpers import build_birth_death, build_pure_death


class TestFullChain:
    def test_birth_death_enumeration(self):
        model = build_birth_death()
        chain = build_full_chain(model, 10)
        assert chain.n_states == 11
        xs = chain.slow_states()[:, 0]
        assert set(np.rint(xs * 10).astype(int)) == set(range(11))

    def test_toy_enumeration(self, toy):
        chain = build_full_chain(toy, 10)
        # 11 lattice levels x 2 fast states
        assert chain.n_states == 22
        assert set(chain.fast_states().tolist()) == {0, 1}

    def test_generator_rows_sum_to_zero(self, toy):
        Q = build_full_chain(toy, 8).generator()
        np.testing.assert_allclose(
            np.asarray(Q.sum(axis=1)).ravel(), 0.0, atol=1e-12
        )

    def test_rates_scaled_by_population(self):
        model = build_birth_death(lam=0.5, mu=1.0)
        chain = build_full_chain(model, 4, x0=np.array([0.0]))
        Q = chain.generator().toarray()
        i0 = chain.index[((0,), 0)]
        i1 = chain.index[((1,), 0)]
        # From n=0: birth rate N * lam * (1 - 0) = 2.
        assert Q[i0, i1] == pytest.approx(4 * 0.5)

    def test_max_states_guard(self, toy):
        with pytest.raises(OracleError, match="exceeds 3"):
            build_full_chain(toy, 50, max_states=3)

    def test_box_leaving_transition_reported(self):
        # ell = +1 with a rate that stays positive at the upper edge.
        model = ts.TwoTimescaleModel(
            name="escape",
            d_x=1,
            fast_states=(0,),
            transitions=(ts.affine_transition([1.0], None, 1.0, [0.0]),),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        with pytest.raises(OracleError, match="leaves the state box"):
            build_full_chain(model, 5)

    def test_negative_rate_reported(self):
        model = ts.TwoTimescaleModel(
            name="neg",
            d_x=1,
            fast_states=(0,),
            transitions=(
                ts.affine_transition([1.0], None, 0.5, [-1.0]),
                ts.affine_transition([-1.0], None, 0.0, [1.0]),
            ),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        # rate 0.5 - x is negative beyond x = 0.5 on the reachable lattice
        with pytest.raises(OracleError, match="negative rate"):
            build_full_chain(model, 10, x0=np.array([0.8]))

    def test_non_integer_jumps_rejected(self):
        model = ts.TwoTimescaleModel(
            name="frac",
            d_x=1,
            fast_states=(0,),
            transitions=(ts.affine_transition([0.5], None, 1.0, [-1.0]),),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        with pytest.raises(OracleError, match="integer jump"):
            build_full_chain(model, 10)

    def test_input_validation(self, toy):
        with pytest.raises(OracleError, match="positive integer"):
            build_full_chain(toy, 0)
        with pytest.raises(OracleError, match="out of range"):
            build_full_chain(toy, 5, y0=7)
        with pytest.raises(OracleError, match="shape"):
            build_full_chain(toy, 5, x0=np.zeros(2))


class TestExactStationary:
    def test_birth_death_is_binomial(self):
        lam, mu, N = 0.7, 1.0, 12
        model = build_birth_death(lam=lam, mu=mu)
        sol = exact_stationary(model, N)
        p = lam / (lam + mu)
        counts = np.rint(sol.chain.slow_states()[:, 0] * N).astype(int)
        expected = binom.pmf(counts, N, p)
        np.testing.assert_allclose(sol.pi, expected, atol=1e-12)
        np.testing.assert_allclose(sol.mean_state(), [p], atol=1e-12)

    def test_residual_small(self, toy):
        sol = exact_stationary(toy, 20)
        assert sol.residual <= 1e-10 * 20 * 6  # rate scale ~ N * max rate

    def test_expectation_accepts_callable_and_observable(self, toy):
        sol = exact_stationary(toy, 15)
        via_callable = sol.expectation(lambda x: x[0])
        via_observable = sol.expectation(Observable.coordinate(0, 1))
        assert via_callable == pytest.approx(via_observable, abs=1e-15)
        assert 0.0 < via_callable < 1.0

    def test_exact_expectation_shortcut(self, toy):
        a = exact_expectation(toy, 10, lambda x: x[0] ** 2)
        sol = exact_stationary(toy, 10)
        assert a == pytest.approx(sol.expectation(lambda x: x[0] ** 2), abs=1e-15)

    def test_independent_of_start_state(self, toy):
        a = exact_stationary(toy, 12, x0=np.array([0.0]), y0=0)
        b = exact_stationary(toy, 12, x0=np.array([1.0]), y0=1)
        ha = a.expectation(lambda x: x[0])
        hb = b.expectation(lambda x: x[0])
        assert ha == pytest.approx(hb, abs=1e-12)

    def test_two_recurrent_classes_rejected(self):
        # Symmetric random walk with rate x(1-x): both endpoints absorb, so
        # the reachable chain from the middle has two recurrent classes and
        # no unique stationary law.
        def walk_rate(x, y):
            return float(x[0] * (1.0 - x[0]))

        model = ts.TwoTimescaleModel(
            name="gamblers-ruin",
            d_x=1,
            fast_states=(0,),
            transitions=(
                ts.Transition(ell=np.array([1.0]), target_fast=None, rate=walk_rate),
                ts.Transition(ell=np.array([-1.0]), target_fast=None, rate=walk_rate),
            ),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        with pytest.raises(OracleError, match="stationary"):
            exact_stationary(model, 4, x0=np.array([0.5]))

    def test_pure_death_concentrates_at_zero(self):
        model = build_pure_death()
        sol = exact_stationary(model, 6, x0=np.array([1.0]))
        i_zero = sol.chain.index[((0,), 0)]
        assert sol.pi[i_zero] == pytest.approx(1.0)
        assert sol.expectation(lambda x: x[0]) == pytest.approx(0.0)


class TestOracleAgainstSimulation:
    def test_toy_simulation_covers_exact_mean(self, toy):
        N = 30
        exact = exact_expectation(toy, N, lambda x: x[0])
        est = ts.estimate_steady_state(
            toy, N, np.ones(1), seed=1, replications=8,
            warmup_events=20_000, measure_events=60_000,
        )
        assert abs(est.mean - exact) <= 4.0 * est.ci_half_width
