"""Fast-chain analysis at a frozen slow state x.

Builds the fast generator K(x), its stationary law pi(x), the deviation
matrix K+(x) = (K+Pi)^{-1}(I-Pi), solves the fast Poisson equation, and
differentiates all of them in x. The stationary solve replaces the last
column of K with ones (bordered system); derivatives ride along the same
factorization:

    d pi = -pi (dM) M^{-1},      M = [K_{:,1..m-1}, 1]
    d K+ = -E^{-1} (dE) K+ - E^{-1} (1 dpi^T),   E = K + Pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _numdiff
from .errors import FastChainError
from .model import TwoTimescaleModel

__all__ = [
    "FastChainAnalysis",
    "build_kernel",
    "stationary_distribution",
    "deviation_matrix",
    "solve_fast_poisson",
    "analyze",
]

NEGATIVE_RATE_TOL = 1e-12
PI_CLIP = 1e-12


@dataclass(eq=False)
class FastChainAnalysis:
    """Kernel, stationary law, deviation matrix, and their x-derivatives."""

    x: np.ndarray
    K: np.ndarray
    pi: np.ndarray
    Pi: np.ndarray
    Kplus: np.ndarray
    dK: np.ndarray  # (d_x, m, m)
    dPi: np.ndarray  # (d_x, m)
    dKplus: np.ndarray  # (d_x, m, m)


def build_kernel(model: TwoTimescaleModel, x, check: str = "strict") -> np.ndarray:
    """Fast generator K[y, y'] = sum_l alpha_{l,y'}(x, y), rows summing to 0.

    check="strict" rejects x outside the box and negative off-diagonal
    entries; check="off" evaluates the smooth algebraic extension (used by
    finite-difference probes that may step just outside the valid region).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d_x,):
        raise FastChainError(f"x has shape {x.shape}, expected ({model.d_x},)")
    if check == "strict":
        if np.any(x < model.box_lower - 1e-9) or np.any(x > model.box_upper + 1e-9):
            raise FastChainError("x is outside the model box")
    m = model.n_fast
    tables = model.tables()
    if tables is not None:
        K = tables.kernel(x)
    else:
        K = np.zeros((m, m))
        for t in model.transitions:
            tgt = t.target_fast
            if tgt is None:
                continue
            for y in range(m):
                if tgt == y:
                    continue
                K[y, tgt] += t.rate(x, y)
        K[np.diag_indices(m)] -= K.sum(axis=1)
    if check == "strict":
        off = K.copy()
        np.fill_diagonal(off, 0.0)
        ymin, tmin = np.unravel_index(np.argmin(off), off.shape)
        if off[ymin, tmin] < -NEGATIVE_RATE_TOL:
            raise FastChainError(
                f"negative kernel rate {off[ymin, tmin]:.3g} for fast transition "
                f"{model.fast_states[ymin]} -> {model.fast_states[tmin]}"
            )
    return K


def _bordered(K: np.ndarray) -> np.ndarray:
    M = K.copy()
    M[:, -1] = 1.0
    return M


def stationary_distribution(K: np.ndarray) -> np.ndarray:
    """Stationary law of the generator K via the bordered linear system."""
    K = np.asarray(K, dtype=float)
    m = K.shape[0]
    scale = max(1.0, float(np.max(np.abs(K))))
    if np.max(np.abs(K.sum(axis=1))) > 1e-9 * scale:
        raise FastChainError("K is not a generator: rows do not sum to 0")
    M = _bordered(K)
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(M.T, rhs)
    except np.linalg.LinAlgError:
        raise FastChainError("no unique stationary distribution (bordered system singular)") from None
    low = float(pi.min())
    if low < -PI_CLIP:
        raise FastChainError(f"no unique stationary distribution (negative mass {low:.3g})")
    np.clip(pi, 0.0, None, out=pi)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ K)))
    if residual > 1e-10 * scale:
        raise FastChainError(f"no unique stationary distribution (residual {residual:.3g})")
    return pi


def deviation_matrix(K: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """K+ = (K + Pi)^{-1} (I - Pi) with Pi = 1 pi^T, the group inverse of -K.

    Uniquely determined by K K+ = I - Pi, pi K+ = 0, and K+ 1 = 0.
    """
    m = K.shape[0]
    Pi = np.tile(pi, (m, 1))
    try:
        Einv = np.linalg.inv(K + Pi)
    except np.linalg.LinAlgError:
        raise FastChainError("K + Pi is singular; no unique irreducible class") from None
    return Einv @ (np.eye(m) - Pi)


def solve_fast_poisson(analysis: FastChainAnalysis, h_values) -> np.ndarray:
    """Canonical Poisson solution G = K+ h, the pi-mean-zero representative.

    Satisfies K G = h - 1 (pi^T h); adding 1 c^T gives the other solutions.
    """
    h = np.asarray(h_values, dtype=float)
    if h.shape[0] != analysis.K.shape[0]:
        raise FastChainError(
            f"h has {h.shape[0]} fast-state rows, kernel has {analysis.K.shape[0]}"
        )
    return analysis.Kplus @ h


def _kernel_derivatives(model: TwoTimescaleModel, x: np.ndarray) -> np.ndarray:
    """dK[i] = dK/dx_i: exact for affine catalogs, analytic gradients next,
    central differences of build_kernel as the fallback."""
    tables = model.tables()
    if tables is not None:
        return tables.dK
    m = model.n_fast
    if all(t.rate_gradient is not None for t in model.transitions):
        dK = np.zeros((model.d_x, m, m))
        for t in model.transitions:
            tgt = t.target_fast
            if tgt is None:
                continue
            for y in range(m):
                if tgt == y:
                    continue
                g = np.asarray(t.rate_gradient(x, y), dtype=float)
                dK[:, y, tgt] += g
                dK[:, y, y] -= g
        return dK
    return _numdiff.directional_derivatives(
        lambda z: build_kernel(model, z, check="off"),
        x,
        model.box_lower,
        model.box_upper,
    )


def analyze(model: TwoTimescaleModel, x, check: str = "strict") -> FastChainAnalysis:
    """Full per-x bundle: K, pi, Pi, K+, and their x-derivatives."""
    x = np.asarray(x, dtype=float)
    K = build_kernel(model, x, check=check)
    pi = stationary_distribution(K)
    m = model.n_fast
    Pi = np.tile(pi, (m, 1))
    try:
        Einv = np.linalg.inv(K + Pi)
    except np.linalg.LinAlgError:
        raise FastChainError("K + Pi is singular; no unique irreducible class") from None
    Kplus = Einv @ (np.eye(m) - Pi)

    dK = _kernel_derivatives(model, x)
    # dpi from the bordered system: the last column of M is constant.
    M = _bordered(K)
    dM_pi = np.einsum("y,iyt->it", pi, dK)
    dM_pi[:, -1] = 0.0
    try:
        dPi = -np.linalg.solve(M.T, dM_pi.T).T
    except np.linalg.LinAlgError:
        raise FastChainError("no unique stationary distribution (bordered system singular)") from None
    dKplus = np.empty_like(dK)
    for i in range(model.d_x):
        dPi_mat = np.tile(dPi[i], (m, 1))
        dE = dK[i] + dPi_mat
        dKplus[i] = -Einv @ (dE @ Kplus + dPi_mat)
    return FastChainAnalysis(x=x, K=K, pi=pi, Pi=Pi, Kplus=Kplus, dK=dK, dPi=dPi, dKplus=dKplus)
