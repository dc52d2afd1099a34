"""Shared test models and naive reference implementations.

The naive functions recompute quantities with plain loops straight from
the transition catalog, independently of the vectorized tables the
library uses, so they serve as oracles for the fast paths.
"""

from __future__ import annotations

import numpy as np

from twoscale.model import Transition, TwoTimescaleModel, affine_transition


def build_toy_generic(lam=1.0, mu=1.0, alpha0=2.0, alpha1=1.0, beta=3.0) -> TwoTimescaleModel:
    """The built-in toy model expressed through raw rate callables."""
    transitions = (
        Transition(
            ell=np.array([1.0]),
            target_fast=None,
            rate=lambda x, y: lam * (1.0 - x[0]) if y == 1 else 0.0,
            rate_gradient=lambda x, y: np.array([-lam]) if y == 1 else np.zeros(1),
        ),
        Transition(
            ell=np.array([-1.0]),
            target_fast=None,
            rate=lambda x, y: mu * x[0],
            rate_gradient=lambda x, y: np.array([mu]),
        ),
        Transition(
            ell=np.array([0.0]),
            target_fast=1,
            rate=lambda x, y: alpha0 + alpha1 * x[0] if y == 0 else 0.0,
            rate_gradient=lambda x, y: np.array([alpha1]) if y == 0 else np.zeros(1),
        ),
        Transition(
            ell=np.array([0.0]),
            target_fast=0,
            rate=lambda x, y: beta if y == 1 else 0.0,
            rate_gradient=lambda x, y: np.zeros(1),
        ),
    )
    return TwoTimescaleModel(
        name="toy-generic",
        d_x=1,
        fast_states=(0, 1),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
    )


def build_degenerate(lam=0.8, mu=1.0, a=2.0, b=3.0) -> TwoTimescaleModel:
    """Nontrivial fast chain whose drift never depends on the fast state."""
    transitions = (
        affine_transition([1.0], None, lam, [-lam]),
        affine_transition([-1.0], None, 0.0, [mu]),
        affine_transition([0.0], 1, a, [0.0], enabled={0}),
        affine_transition([0.0], 0, b, [0.0], enabled={1}),
    )
    return TwoTimescaleModel(
        name="degenerate",
        d_x=1,
        fast_states=(0, 1),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
    )


def build_birth_death(lam=0.7, mu=1.0) -> TwoTimescaleModel:
    """Single slow coordinate, trivial fast chain; stationary law binomial."""
    transitions = (
        affine_transition([1.0], None, lam, [-lam]),
        affine_transition([-1.0], None, 0.0, [mu]),
    )
    return TwoTimescaleModel(
        name="birth-death",
        d_x=1,
        fast_states=(0,),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
    )


def build_pure_arrival(lam=1.0) -> TwoTimescaleModel:
    """Only arrivals: E[x(t)] = 1 - (1 - x0) exp(-lam t) exactly."""
    transitions = (affine_transition([1.0], None, lam, [-lam]),)
    return TwoTimescaleModel(
        name="pure-arrival",
        d_x=1,
        fast_states=(0,),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
    )


def build_pure_death(mu=1.0) -> TwoTimescaleModel:
    """Only departures; absorbs at the empty state."""
    transitions = (affine_transition([-1.0], None, 0.0, [mu]),)
    return TwoTimescaleModel(
        name="pure-death",
        d_x=1,
        fast_states=(0,),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
    )


def naive_kernel(model: TwoTimescaleModel, x: np.ndarray) -> np.ndarray:
    m = model.n_fast
    K = np.zeros((m, m))
    for t in model.transitions:
        for y in range(m):
            tgt = y if t.target_fast is None else t.target_fast
            if tgt == y:
                continue
            r = t.rate(x, y)
            K[y, tgt] += r
            K[y, y] -= r
    return K


def naive_drift_matrix(model: TwoTimescaleModel, x: np.ndarray) -> np.ndarray:
    F = np.zeros((model.n_fast, model.d_x))
    for t in model.transitions:
        for y in range(model.n_fast):
            F[y] += t.rate(x, y) * t.ell
    return F


def naive_qbar(model: TwoTimescaleModel, x: np.ndarray, pi: np.ndarray) -> np.ndarray:
    d = model.d_x
    Q = np.zeros((d, d))
    for t in model.transitions:
        for y in range(model.n_fast):
            Q += pi[y] * t.rate(x, y) * np.outer(t.ell, t.ell)
    return Q


def naive_O(model: TwoTimescaleModel, x: np.ndarray, pi: np.ndarray, Kplus: np.ndarray) -> np.ndarray:
    F = naive_drift_matrix(model, x)
    GF = Kplus @ F
    O = np.zeros((model.d_x, model.d_x))
    for t in model.transitions:
        for y in range(model.n_fast):
            tgt = y if t.target_fast is None else t.target_fast
            O += pi[y] * t.rate(x, y) * np.outer(GF[tgt], t.ell)
    return O


def queue_weights(model: TwoTimescaleModel, class_index: int) -> np.ndarray:
    buffer = int(model.info["buffer"])
    w = np.zeros(model.d_x)
    w[class_index * buffer : (class_index + 1) * buffer] = 1.0
    return w
