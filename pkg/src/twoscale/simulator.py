"""Stochastic simulation of the full finite-N Markov system.

The slow state is kept as integer counts n with x = n/N, so trajectories
live exactly on the lattice. Hot loops run in a compiled extension when
available and fall back to a pure-Python twin otherwise; the two produce
bit-identical output from the same seed (verified in the test suite).

Replication r of a run with seed s draws from an xoshiro256** stream
seeded by splitmix64 applied to s XOR r, so any replication can be
reproduced in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as _student_t

from .errors import SimulationError
from .model import TwoTimescaleModel

try:
    from . import _simcore as _compiled_core
except ImportError:
    _compiled_core = None
from . import _simcore_py as _python_core

__all__ = [
    "STATUS_OK",
    "STATUS_ABSORBED",
    "STATUS_ABSORBED_MEASURE",
    "STATUS_NEGATIVE_RATE",
    "STATUS_BOX",
    "STATUS_BUDGET",
    "available_backends",
    "backend_name",
    "set_backend",
    "seed_stream",
    "EventTrajectory",
    "EstimateWithCI",
    "TransientEstimate",
    "simulate_path",
    "estimate_transient_mean",
    "estimate_steady_state",
    "estimate_steady_state_multi",
    "DEFAULT_WARMUP_EVENTS",
    "DEFAULT_MEASURE_EVENTS",
    "DEFAULT_REPLICATIONS",
]

STATUS_OK = _python_core.STATUS_OK
STATUS_ABSORBED = _python_core.STATUS_ABSORBED
STATUS_ABSORBED_MEASURE = _python_core.STATUS_ABSORBED_MEASURE
STATUS_NEGATIVE_RATE = _python_core.STATUS_NEGATIVE_RATE
STATUS_BOX = _python_core.STATUS_BOX
STATUS_BUDGET = _python_core.STATUS_BUDGET

DEFAULT_WARMUP_EVENTS = 2_500_000
DEFAULT_MEASURE_EVENTS = 7_500_000
DEFAULT_REPLICATIONS = 40

_MASK64 = (1 << 64) - 1

_active_core = _compiled_core if _compiled_core is not None else _python_core


def available_backends() -> tuple[str, ...]:
    names = ["python"]
    if _compiled_core is not None:
        names.insert(0, "compiled")
    return tuple(names)


def backend_name() -> str:
    return _active_core.BACKEND


def set_backend(name: str) -> str:
    """Select the event-loop backend: "compiled", "python", or "auto"."""
    global _active_core
    if name == "auto":
        _active_core = _compiled_core if _compiled_core is not None else _python_core
    elif name == "python":
        _active_core = _python_core
    elif name == "compiled":
        if _compiled_core is None:
            raise SimulationError("compiled backend is not available")
        _active_core = _compiled_core
    else:
        raise SimulationError(f"unknown backend {name!r}")
    return _active_core.BACKEND


def seed_stream(seed: int, replication: int = 0) -> np.ndarray:
    """Initial xoshiro256** state for one replication of a seeded run."""
    s = (int(seed) ^ int(replication)) & _MASK64
    words = []
    for _ in range(4):
        s = (s + 0x9E3779B97F4A7C15) & _MASK64
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        words.append(z)
    if not any(words):
        words[0] = 0x9E3779B97F4A7C15
    return np.array(words, dtype=np.uint64)


def _require_sim_tables(model: TwoTimescaleModel):
    tables = model.tables()
    if tables is None:
        raise SimulationError(
            "simulation requires transitions with affine rate descriptions"
        )
    if tables.ell_ptr is None:
        raise SimulationError("simulation requires integer jump vectors")
    return tables


def _table_args(tables) -> tuple:
    return (
        tables.c0,
        tables.coef_ptr,
        tables.coef_idx,
        tables.coef_val,
        tables.ell_ptr,
        tables.ell_idx,
        tables.ell_val,
        tables.target,
        tables.y_ptr,
        tables.y_trans,
        tables.max_degree,
    )


def _integer_box(model: TwoTimescaleModel, N: int) -> tuple[np.ndarray, np.ndarray]:
    nlo = np.ceil(model.box_lower * N - 1e-9).astype(np.int64)
    nhi = np.floor(model.box_upper * N + 1e-9).astype(np.int64)
    return nlo, nhi


def _initial_counts(model: TwoTimescaleModel, N: int, x0) -> np.ndarray:
    if x0 is None:
        x0 = model.box_lower
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.d_x,):
        raise SimulationError(f"x0 has shape {x0.shape}, expected ({model.d_x},)")
    if np.any(x0 < model.box_lower - 1e-9) or np.any(x0 > model.box_upper + 1e-9):
        raise SimulationError("x0 lies outside the state box")
    n0 = np.rint(x0 * N).astype(np.int64)
    nlo, nhi = _integer_box(model, N)
    np.clip(n0, nlo, nhi, out=n0)
    return n0


def _check_setup(model: TwoTimescaleModel, N: int, y0: int) -> None:
    if int(N) != N or N < 1:
        raise SimulationError(f"N must be a positive integer, got {N!r}")
    if not 0 <= y0 < model.n_fast:
        raise SimulationError(f"fast state index {y0} out of range")


def _weights_vector(model: TwoTimescaleModel, weights) -> np.ndarray:
    w = np.ascontiguousarray(weights, dtype=float)
    if w.shape != (model.d_x,):
        raise SimulationError(f"weights have shape {w.shape}, expected ({model.d_x},)")
    if not np.all(np.isfinite(w)):
        raise SimulationError("weights must be finite")
    return w


def _raise_for_status(status: int, replication: int) -> None:
    if status == STATUS_NEGATIVE_RATE:
        raise SimulationError(
            f"rate below tolerance during simulation (replication {replication})"
        )
    if status == STATUS_BOX:
        raise SimulationError(
            f"state left the integer box during simulation (replication {replication})"
        )


@dataclass(eq=False)
class EventTrajectory:
    """One sample path: jump times, which transition fired, fast state after."""

    model: TwoTimescaleModel
    N: int
    n0: np.ndarray
    y0: int
    times: np.ndarray
    trans_idx: np.ndarray
    fast_states: np.ndarray
    t_final: float
    status: int

    @property
    def n_events(self) -> int:
        return self.times.shape[0]

    def state_times(self) -> np.ndarray:
        return np.concatenate([[0.0], self.times])

    def states(self) -> np.ndarray:
        """Slow states after each event, initial state first; exact lattice."""
        tables = self.model.tables()
        jumps = tables.ell_int[self.trans_idx]
        path = self.n0[None, :] + np.concatenate(
            [np.zeros((1, self.model.d_x), dtype=np.int64), np.cumsum(jumps, axis=0)]
        )
        return path / float(self.N)

    def fast_path(self) -> np.ndarray:
        return np.concatenate([[self.y0], self.fast_states])


@dataclass(eq=False)
class EstimateWithCI:
    """Steady-state estimate with a Student-t confidence half-width."""

    mean: float
    ci_half_width: float
    replications: int
    seed: int
    n_absorbed: int = 0
    estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    statuses: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass(eq=False)
class TransientEstimate:
    """Across-replication mean of an observable on a time grid."""

    times: np.ndarray
    mean: np.ndarray
    ci_half_width: np.ndarray
    per_replication: np.ndarray
    seed: int
    n_absorbed: int = 0


def simulate_path(
    model: TwoTimescaleModel,
    N: int,
    t_end: float,
    seed: int = 0,
    replication: int = 0,
    x0=None,
    y0: int = 0,
    max_events: int = 1_000_000,
) -> EventTrajectory:
    """One full event log up to t_end. Memory scales with max_events."""
    _check_setup(model, N, y0)
    tables = _require_sim_tables(model)
    n = _initial_counts(model, N, x0)
    n0 = n.copy()
    nlo, nhi = _integer_box(model, N)
    out_t = np.zeros(max_events)
    out_j = np.zeros(max_events, dtype=np.int64)
    out_y = np.zeros(max_events, dtype=np.int64)
    rng = seed_stream(seed, replication)
    status, y_fin, t_fin, count = _active_core.run_path(
        *_table_args(tables),
        n,
        int(y0),
        nlo,
        nhi,
        float(N),
        0.0,
        float(t_end),
        out_t,
        out_j,
        out_y,
        rng,
    )
    _raise_for_status(status, replication)
    if status == STATUS_BUDGET:
        raise SimulationError(
            f"event budget {max_events} exhausted at t={t_fin:.6g} "
            f"(replication {replication}); raise max_events"
        )
    return EventTrajectory(
        model=model,
        N=int(N),
        n0=n0,
        y0=int(y0),
        times=out_t[:count].copy(),
        trans_idx=out_j[:count].copy(),
        fast_states=out_y[:count].copy(),
        t_final=float(t_fin),
        status=int(status),
    )


def estimate_transient_mean(
    model: TwoTimescaleModel,
    N: int,
    t_grid,
    weights,
    seed: int = 0,
    replications: int = 100,
    x0=None,
    y0: int = 0,
    max_events: int = 100_000_000,
) -> TransientEstimate:
    """Mean of a linear observable w @ x(t) over replications, on a time grid.

    Absorbed replications are kept: the frozen value is the true sample
    path. The grid must be sorted and nonnegative.
    """
    _check_setup(model, N, y0)
    if replications < 2:
        raise SimulationError("at least 2 replications are required")
    tables = _require_sim_tables(model)
    w = _weights_vector(model, weights)
    t_grid = np.ascontiguousarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise SimulationError("t_grid must be a nonempty 1-d array")
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise SimulationError("t_grid must be sorted and nonnegative")
    n0 = _initial_counts(model, N, x0)
    nlo, nhi = _integer_box(model, N)
    inv_n = 1.0 / float(N)
    dh = np.ascontiguousarray((tables.ell @ w) * inv_n)
    hval0 = float(w @ (n0 * inv_n))
    per_rep = np.zeros((replications, t_grid.size))
    n_absorbed = 0
    for r in range(replications):
        n = n0.copy()
        rng = seed_stream(seed, r)
        out_h = per_rep[r]
        status, _y, _t, _ev, filled = _active_core.transient_grid(
            *_table_args(tables),
            n,
            int(y0),
            nlo,
            nhi,
            float(N),
            dh,
            hval0,
            t_grid,
            out_h,
            int(max_events),
            rng,
        )
        _raise_for_status(status, r)
        if status == STATUS_BUDGET:
            raise SimulationError(
                f"event budget {max_events} exhausted before t={t_grid[-1]:.6g} "
                f"(replication {r}); raise max_events"
            )
        if status == STATUS_ABSORBED:
            n_absorbed += 1
    mean = per_rep.mean(axis=0)
    sd = per_rep.std(axis=0, ddof=1)
    tq = float(_student_t.ppf(0.975, replications - 1))
    return TransientEstimate(
        times=t_grid.copy(),
        mean=mean,
        ci_half_width=tq * sd / math.sqrt(replications),
        per_replication=per_rep,
        seed=int(seed),
        n_absorbed=n_absorbed,
    )


def estimate_steady_state(
    model: TwoTimescaleModel,
    N: int,
    weights,
    seed: int = 0,
    replications: int = DEFAULT_REPLICATIONS,
    warmup_events: int = DEFAULT_WARMUP_EVENTS,
    measure_events: int = DEFAULT_MEASURE_EVENTS,
    measure_time_limit: float = math.inf,
    x0=None,
    y0: int = 0,
) -> EstimateWithCI:
    """Long-run time average of w @ x with a 95% confidence half-width.

    Each replication warms up for warmup_events events and then averages
    over measure_events more (or measure_time_limit of simulated time,
    whichever ends first). Replications absorbed before finishing are
    excluded from the estimate; fewer than 2 survivors is an error.
    """
    _check_setup(model, N, y0)
    if replications < 2:
        raise SimulationError("at least 2 replications are required")
    if measure_events < 1 and not math.isfinite(measure_time_limit):
        raise SimulationError("measurement budget is empty")
    tables = _require_sim_tables(model)
    w = _weights_vector(model, weights)
    n0 = _initial_counts(model, N, x0)
    nlo, nhi = _integer_box(model, N)
    inv_n = 1.0 / float(N)
    dh = np.ascontiguousarray((tables.ell @ w) * inv_n)
    hval0 = float(w @ (n0 * inv_n))
    estimates = np.full(replications, np.nan)
    statuses = np.zeros(replications, dtype=np.int64)
    for r in range(replications):
        n = n0.copy()
        rng = seed_stream(seed, r)
        status, est, _t_meas, _y, _ev = _active_core.steady_state_avg(
            *_table_args(tables),
            n,
            int(y0),
            nlo,
            nhi,
            float(N),
            dh,
            hval0,
            int(warmup_events),
            int(measure_events),
            float(measure_time_limit),
            rng,
        )
        _raise_for_status(status, r)
        statuses[r] = status
        if status == STATUS_OK:
            estimates[r] = est
    valid = estimates[np.isfinite(estimates)]
    n_absorbed = int(np.sum((statuses == STATUS_ABSORBED) | (statuses == STATUS_ABSORBED_MEASURE)))
    if valid.size < 2:
        raise SimulationError(
            f"only {valid.size} of {replications} replications completed; "
            "cannot form a confidence interval"
        )
    tq = float(_student_t.ppf(0.975, valid.size - 1))
    return EstimateWithCI(
        mean=float(valid.mean()),
        ci_half_width=float(tq * valid.std(ddof=1) / math.sqrt(valid.size)),
        replications=int(valid.size),
        seed=int(seed),
        n_absorbed=n_absorbed,
        estimates=estimates,
        statuses=statuses,
    )


def estimate_steady_state_multi(
    model: TwoTimescaleModel,
    N: int,
    weights_list,
    **kwargs,
) -> list[EstimateWithCI]:
    """Steady-state estimates for several observables on the same seeds.

    Each observable replays the identical trajectories (same replication
    streams), so estimates are comparable across observables.
    """
    return [estimate_steady_state(model, N, w, **kwargs) for w in weights_list]
