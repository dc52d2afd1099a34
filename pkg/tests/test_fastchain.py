from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import null_space

import twoscale as ts
from twoscale.errors import FastChainError

from helpers import build_toy_generic, naive_kernel


def toy_pi(xv: float) -> np.ndarray:
    """Stationary law of the toy fast chain: pi_1 = (2 + x) / (5 + x)."""
    p1 = (2.0 + xv) / (5.0 + xv)
    return np.array([1.0 - p1, p1])


class TestKernel:
    def test_matches_naive_on_random_states(self, csma3):
        rng = np.random.default_rng(0)
        for x in ts.sample_states(csma3, rng, 8):
            np.testing.assert_allclose(
                ts.build_kernel(csma3, x), naive_kernel(csma3, x), atol=1e-12
            )

    def test_rows_sum_to_zero(self, csma5):
        rng = np.random.default_rng(1)
        for x in ts.sample_states(csma5, rng, 4):
            K = ts.build_kernel(csma5, x)
            np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-12)

    def test_generic_model_agrees_with_affine(self, toy):
        gen = build_toy_generic()
        x = np.array([0.37])
        np.testing.assert_allclose(
            ts.build_kernel(gen, x), ts.build_kernel(toy, x), atol=1e-14
        )

    def test_strict_rejects_x_outside_box(self, toy):
        with pytest.raises(FastChainError, match="outside"):
            ts.build_kernel(toy, np.array([1.5]))

    def test_check_off_allows_x_outside_box(self, toy):
        K = ts.build_kernel(toy, np.array([1.5]), check="off")
        assert K.shape == (2, 2)

    def test_strict_rejects_negative_rate(self):
        model = ts.TwoTimescaleModel(
            name="neg",
            d_x=1,
            fast_states=(0, 1),
            transitions=(
                ts.affine_transition([0.0], 1, -1.0, [0.0], enabled=(0,)),
                ts.affine_transition([0.0], 0, 1.0, [0.0], enabled=(1,)),
            ),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        with pytest.raises(FastChainError, match="negative kernel rate"):
            ts.build_kernel(model, np.array([0.5]))

    def test_shape_mismatch(self, toy):
        with pytest.raises(FastChainError, match="shape"):
            ts.build_kernel(toy, np.array([0.1, 0.2]))


class TestStationary:
    def test_toy_closed_form(self, toy):
        for xv in (0.0, 0.3, 1.0):
            K = ts.build_kernel(toy, np.array([xv]))
            np.testing.assert_allclose(
                ts.stationary_distribution(K), toy_pi(xv), atol=1e-14
            )

    def test_against_null_space(self, csma3):
        rng = np.random.default_rng(2)
        for x in ts.sample_states(csma3, rng, 6):
            K = ts.build_kernel(csma3, x)
            pi = ts.stationary_distribution(K)
            ns = null_space(K.T)
            assert ns.shape[1] == 1
            ref = ns[:, 0] / ns[:, 0].sum()
            np.testing.assert_allclose(pi, ref, atol=1e-11)

    def test_left_null_vector(self, csma5):
        rng = np.random.default_rng(3)
        x = ts.sample_states(csma5, rng, 1)[0]
        K = ts.build_kernel(csma5, x)
        pi = ts.stationary_distribution(K)
        assert np.max(np.abs(pi @ K)) <= 1e-10 * max(1.0, np.max(np.abs(K)))
        assert abs(pi.sum() - 1.0) < 1e-14
        assert np.all(pi >= 0.0)

    def test_rejects_non_generator(self):
        with pytest.raises(FastChainError, match="generator"):
            ts.stationary_distribution(np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_rejects_reducible_chain(self):
        # Two isolated recurrent blocks: stationary law is not unique.
        K = np.zeros((4, 4))
        K[0, 1] = K[1, 0] = 1.0
        K[2, 3] = K[3, 2] = 1.0
        K[np.diag_indices(4)] = -K.sum(axis=1)
        with pytest.raises(FastChainError, match="stationary"):
            ts.stationary_distribution(K)


class TestDeviationMatrix:
    def test_defining_identities(self, csma3):
        rng = np.random.default_rng(4)
        x = ts.sample_states(csma3, rng, 1)[0]
        a = ts.analyze(csma3, x)
        m = a.K.shape[0]
        one = np.ones(m)
        np.testing.assert_allclose(a.K @ a.Kplus, np.eye(m) - a.Pi, atol=1e-10)
        np.testing.assert_allclose(a.pi @ a.Kplus, 0.0, atol=1e-12)
        np.testing.assert_allclose(a.Kplus @ one, 0.0, atol=1e-12)

    def test_identities_pin_unique_matrix(self, toy):
        # Any D with K D = I - Pi and pi D = 0 equals K+: the first equation
        # determines D up to 1 c^T, the second forces c = 0.
        x = np.array([0.3])
        a = ts.analyze(toy, x)
        D = a.Kplus + np.outer(np.ones(2), np.array([0.1, -0.2]))
        np.testing.assert_allclose(a.K @ D, np.eye(2) - a.Pi, atol=1e-12)
        assert np.max(np.abs(a.pi @ D)) > 1e-3

    def test_doubling_kernel_halves_deviation(self, csma3):
        rng = np.random.default_rng(5)
        x = ts.sample_states(csma3, rng, 1)[0]
        K = ts.build_kernel(csma3, x)
        pi = ts.stationary_distribution(K)
        D1 = ts.deviation_matrix(K, pi)
        D2 = ts.deviation_matrix(2.0 * K, pi)
        np.testing.assert_allclose(D2, 0.5 * D1, atol=1e-12)

    def test_poisson_equation(self, csma3):
        rng = np.random.default_rng(6)
        x = ts.sample_states(csma3, rng, 1)[0]
        a = ts.analyze(csma3, x)
        h = rng.standard_normal(a.K.shape[0])
        G = ts.solve_fast_poisson(a, h)
        centered = h - np.ones_like(h) * (a.pi @ h)
        np.testing.assert_allclose(a.K @ G, centered, atol=1e-10)
        assert abs(a.pi @ G) < 1e-12

    def test_poisson_centering_automatic(self, csma3):
        rng = np.random.default_rng(7)
        x = ts.sample_states(csma3, rng, 1)[0]
        a = ts.analyze(csma3, x)
        h = rng.standard_normal(a.K.shape[0])
        np.testing.assert_allclose(
            ts.solve_fast_poisson(a, h),
            ts.solve_fast_poisson(a, h + 4.2),
            atol=1e-12,
        )

    def test_poisson_shape_mismatch(self, toy):
        a = ts.analyze(toy, np.array([0.5]))
        with pytest.raises(FastChainError, match="rows"):
            ts.solve_fast_poisson(a, np.ones(3))


class TestDerivatives:
    @staticmethod
    def _fd_check(model, x, attr, get, tol):
        a = ts.analyze(model, x)
        h = 1e-6
        for i in range(model.d_x):
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            fd = (get(ts.analyze(model, xp, check="off")) - get(ts.analyze(model, xm, check="off"))) / (2 * h)
            np.testing.assert_allclose(getattr(a, attr)[i], fd, atol=tol)

    def test_dpi_toy_closed_form(self, toy):
        # d/dx of (2+x)/(5+x) is 3/(5+x)^2.
        xv = 0.3
        a = ts.analyze(toy, np.array([xv]))
        d1 = 3.0 / (5.0 + xv) ** 2
        np.testing.assert_allclose(a.dPi[0], [-d1, d1], atol=1e-13)

    def test_dpi_matches_finite_differences(self, csma3):
        rng = np.random.default_rng(8)
        x = ts.sample_states(csma3, rng, 1, margin=0.05)[0]
        self._fd_check(csma3, x, "dPi", lambda a: a.pi, 1e-6)

    def test_dkplus_matches_finite_differences(self, csma3):
        rng = np.random.default_rng(9)
        x = ts.sample_states(csma3, rng, 1, margin=0.05)[0]
        self._fd_check(csma3, x, "dKplus", lambda a: a.Kplus, 1e-5)

    def test_dk_exact_for_affine(self, csma3):
        rng = np.random.default_rng(10)
        x = ts.sample_states(csma3, rng, 1, margin=0.05)[0]
        self._fd_check(csma3, x, "dK", lambda a: a.K, 1e-7)

    def test_generic_gradient_path_matches_affine(self, toy):
        gen = build_toy_generic()
        x = np.array([0.42])
        aa = ts.analyze(toy, x)
        ag = ts.analyze(gen, x)
        np.testing.assert_allclose(ag.dK, aa.dK, atol=1e-12)
        np.testing.assert_allclose(ag.dPi, aa.dPi, atol=1e-12)
        np.testing.assert_allclose(ag.dKplus, aa.dKplus, atol=1e-11)
