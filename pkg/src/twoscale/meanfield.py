"""Drift, averaged drift, mean-field ODE integration, and the fixed point.

The mean-field approximation follows d phi/dt = F_bar(phi) with
F_bar(x) = sum_y pi_y(x) F(x, y); its equilibrium phi_inf anchors the
refined steady-state estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeanFieldError
from .fastchain import build_kernel, stationary_distribution
from .model import TwoTimescaleModel

__all__ = [
    "Trajectory",
    "FixedPoint",
    "drift",
    "drift_matrix",
    "average_drift",
    "integrate",
    "fixed_point",
]

BOX_TOL = 1e-9


@dataclass(eq=False)
class Trajectory:
    """Time-ordered states; piecewise-polynomial for ODE output."""

    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(eq=False)
class FixedPoint:
    x_star: np.ndarray
    residual: float
    jacobian_spectral_abscissa: float
    warnings: tuple[str, ...] = field(default=())


def drift_matrix(model: TwoTimescaleModel, x, check: str = "strict") -> np.ndarray:
    """All per-fast-state drifts stacked: row y is F(x, y)."""
    x = np.asarray(x, dtype=float)
    tables = model.tables()
    if tables is not None:
        return tables.drift_matrix(x)
    F = np.zeros((model.n_fast, model.d_x))
    for t in model.transitions:
        if not np.any(t.ell):
            continue
        for y in range(model.n_fast):
            F[y] += t.rate(x, y) * t.ell
    return F


def drift(model: TwoTimescaleModel, x, y: int) -> np.ndarray:
    """F(x, y) = sum over the catalog of alpha_{l,y'}(x, y) * l."""
    if not 0 <= y < model.n_fast:
        raise MeanFieldError(f"fast index {y} out of range")
    return drift_matrix(model, x)[y]


def average_drift(model: TwoTimescaleModel, x, check: str = "strict") -> np.ndarray:
    """F_bar(x): drift averaged over the fast chain's stationary law at x."""
    x = np.asarray(x, dtype=float)
    K = build_kernel(model, x, check=check)
    pi = stationary_distribution(K)
    return drift_matrix(model, x, check=check).T @ pi


def _check_box(model: TwoTimescaleModel, x: np.ndarray, t: float) -> None:
    lo_bad = x < model.box_lower - BOX_TOL
    hi_bad = x > model.box_upper + BOX_TOL
    if np.any(lo_bad) or np.any(hi_bad):
        i = int(np.argmax(lo_bad | hi_bad))
        raise MeanFieldError(
            f"trajectory left the state box at t={t:.6g} (coordinate {i}, value {x[i]:.6g})"
        )


def _rk4_step(model: TwoTimescaleModel, x: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    # stage evaluations may graze the region boundary; the accepted state is
    # box-checked by the caller
    k2 = average_drift(model, x + 0.5 * h * k1, check="off")
    k3 = average_drift(model, x + 0.5 * h * k2, check="off")
    k4 = average_drift(model, x + h * k3, check="off")
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    model: TwoTimescaleModel,
    x0,
    t_end: float,
    dt: float = 1e-2,
    method: str = "rk4",
    rtol: float = 1e-6,
    atol: float = 1e-9,
    record_every: int = 1,
) -> Trajectory:
    """Solve the mean-field ODE from x0 up to t_end.

    method="rk4" is the fixed-step default; method="adaptive" delegates to
    scipy's RK45 with the given tolerances. Box exits beyond 1e-9 raise.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.d_x,):
        raise MeanFieldError(f"x0 has shape {x.shape}, expected ({model.d_x},)")
    _check_box(model, x, 0.0)
    if t_end < 0:
        raise MeanFieldError("t_end must be nonnegative")
    if t_end == 0:
        return Trajectory(times=np.zeros(1), states=x[None, :].copy())

    if method == "adaptive":
        from scipy.integrate import solve_ivp

        sol = solve_ivp(
            lambda _t, z: average_drift(model, z, check="off"),
            (0.0, float(t_end)),
            x,
            method="RK45",
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise MeanFieldError(f"adaptive integration failed: {sol.message}")
        states = sol.y.T.copy()
        for t, row in zip(sol.t, states):
            _check_box(model, row, float(t))
        return Trajectory(times=sol.t.copy(), states=states)
    if method != "rk4":
        raise MeanFieldError(f"unknown integration method {method!r}")

    n_steps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    times = [0.0]
    states = [x.copy()]
    t = 0.0
    for k in range(n_steps):
        h = min(dt, t_end - t)
        k1 = average_drift(model, x, check="off")
        x = _rk4_step(model, x, h, k1)
        t = t_end if k == n_steps - 1 else t + h
        _check_box(model, x, t)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            times.append(t)
            states.append(x.copy())
    return Trajectory(times=np.asarray(times), states=np.asarray(states))


def fixed_point(
    model: TwoTimescaleModel,
    x0=None,
    t_max: float = 1e4,
    dt: float = 1e-2,
    coarse_tol: float = 1e-6,
    newton_tol: float = 1e-10,
    max_newton: int = 50,
) -> FixedPoint:
    """phi_inf: integrate into the basin, then polish with damped Newton.

    Raises MeanFieldError when no point with ||F_bar||_inf <= 1e-8 is found;
    a nonnegative Jacobian spectral abscissa is attached as a warning (the
    exponential-stability certificate of the model assumptions failed).
    """
    from . import refinement  # deferred: refinement imports this module

    if x0 is None:
        x = 0.5 * (model.box_lower + model.box_upper)
    else:
        x = np.asarray(x0, dtype=float).copy()
    _check_box(model, x, 0.0)

    t = 0.0
    fbar = average_drift(model, x, check="off")
    while np.max(np.abs(fbar)) >= coarse_tol and t < t_max:
        x = _rk4_step(model, x, dt, fbar)
        np.clip(x, model.box_lower, model.box_upper, out=x)
        t += dt
        fbar = average_drift(model, x, check="off")

    res = float(np.max(np.abs(fbar)))
    for _ in range(max_newton):
        if res <= newton_tol:
            break
        A = refinement.jacobian_A(model, x, require_hurwitz=False)
        try:
            step = np.linalg.solve(A, -fbar)
        except np.linalg.LinAlgError:
            raise MeanFieldError("fixed point not found (singular Jacobian)") from None
        alpha = 1.0
        while True:
            x_new = np.clip(x + alpha * step, model.box_lower, model.box_upper)
            f_new = average_drift(model, x_new, check="off")
            res_new = float(np.max(np.abs(f_new)))
            if res_new < res:
                break
            alpha *= 0.5
            if alpha < 2.0**-40:
                raise MeanFieldError("fixed point not found (Newton line search stalled)")
        x, fbar, res = x_new, f_new, res_new

    if res > 1e-8:
        raise MeanFieldError(f"fixed point not found (residual {res:.3g} after Newton)")
    A = refinement.jacobian_A(model, x, require_hurwitz=False)
    abscissa = float(np.max(np.linalg.eigvals(A).real))
    warnings = () if abscissa < 0 else ("A3 certificate failed",)
    return FixedPoint(
        x_star=x,
        residual=res,
        jacobian_spectral_abscissa=abscissa,
        warnings=warnings,
    )
