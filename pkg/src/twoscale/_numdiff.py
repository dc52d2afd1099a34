"""Finite-difference helpers with box-aware steps.

Central differences with step h_i = cbrt(eps) * max(1, |x_i|), falling back
to one-sided differences when x +/- h would leave the box.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

CBRT_EPS = float(np.finfo(float).eps) ** (1.0 / 3.0)


def fd_steps(x: np.ndarray, scale: float = CBRT_EPS) -> np.ndarray:
    return scale * np.maximum(1.0, np.abs(x))


def directional_derivatives(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    step: float | np.ndarray | None = None,
) -> np.ndarray:
    """Stack of d/dx_i f(x), shape (d_x,) + shape(f(x)).

    Central differences where the box allows, one-sided at the boundary.
    """
    x = np.asarray(x, dtype=float)
    h = fd_steps(x) if step is None else np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    f0 = None
    out = None
    for i in range(x.size):
        lo = -np.inf if lower is None else lower[i]
        hi = np.inf if upper is None else upper[i]
        up_ok = x[i] + h[i] <= hi
        dn_ok = x[i] - h[i] >= lo
        if not up_ok and not dn_ok:
            raise ValueError(f"box too narrow for finite differences at coordinate {i}")
        xp = x.copy()
        xm = x.copy()
        if up_ok and dn_ok:
            xp[i] += h[i]
            xm[i] -= h[i]
            fp = np.asarray(f(xp), dtype=float)
            fm = np.asarray(f(xm), dtype=float)
        elif up_ok:
            xp[i] += h[i]
            fp = np.asarray(f(xp), dtype=float)
            if f0 is None:
                f0 = np.asarray(f(x), dtype=float)
            fm = f0
        else:
            xm[i] -= h[i]
            fm = np.asarray(f(xm), dtype=float)
            if f0 is None:
                f0 = np.asarray(f(x), dtype=float)
            fp = f0
        denom = xp[i] - xm[i]  # actual step after rounding
        if out is None:
            out = np.empty((x.size,) + fp.shape, dtype=float)
        out[i] = (fp - fm) / denom
    if out is None:  # d_x = 0 cannot occur for valid models
        raise ValueError("empty state vector")
    return out
