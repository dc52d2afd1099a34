"""Exact stationary analysis of the finite-N chain on its integer lattice.

Enumerates the states reachable from the initial condition, assembles the
generator, and solves for the stationary law directly. Feasible only for
small instances; its role is to provide ground truth that simulation and
the refined mean-field estimates are checked against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import OracleError
from .model import TwoTimescaleModel

__all__ = [
    "FullChainIndex",
    "ExactStationary",
    "build_full_chain",
    "exact_stationary",
    "exact_expectation",
]

RATE_EDGE_TOL = 1e-12
NEG_RATE_TOL = -1e-9
DENSE_LIMIT = 2000
MAX_STATES = 200_000


@dataclass(eq=False)
class FullChainIndex:
    """Reachable states of the finite-N chain, in discovery (BFS) order."""

    model: TwoTimescaleModel
    N: int
    states: list[tuple[tuple[int, ...], int]]
    index: dict[tuple[tuple[int, ...], int], int]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    def generator(self) -> sp.csr_matrix:
        """Sparse generator: off-diagonal jump rates, diagonal minus row sums."""
        n = self.n_states
        Q = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(n, n)).tocsr()
        out = np.asarray(Q.sum(axis=1)).ravel()
        return (Q + sp.diags(-out)).tocsr()

    def slow_states(self) -> np.ndarray:
        return np.array([s[0] for s in self.states], dtype=np.int64) / float(self.N)

    def fast_states(self) -> np.ndarray:
        return np.array([s[1] for s in self.states], dtype=np.int64)


def _integer_jumps(model: TwoTimescaleModel) -> np.ndarray:
    ells = np.array([t.ell for t in model.transitions])
    rounded = np.rint(ells)
    if np.max(np.abs(ells - rounded), initial=0.0) > 1e-9:
        raise OracleError("exact analysis requires integer jump vectors")
    return rounded.astype(np.int64)


def build_full_chain(
    model: TwoTimescaleModel,
    N: int,
    x0=None,
    y0: int = 0,
    max_states: int = MAX_STATES,
) -> FullChainIndex:
    """Breadth-first enumeration of the chain reachable from (x0, y0)."""
    if int(N) != N or N < 1:
        raise OracleError(f"N must be a positive integer, got {N!r}")
    if not 0 <= y0 < model.n_fast:
        raise OracleError(f"fast state index {y0} out of range")
    if x0 is None:
        x0 = model.box_lower
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.d_x,):
        raise OracleError(f"x0 has shape {x0.shape}, expected ({model.d_x},)")
    n0 = np.rint(x0 * N).astype(np.int64)
    nlo = np.ceil(model.box_lower * N - 1e-9).astype(np.int64)
    nhi = np.floor(model.box_upper * N + 1e-9).astype(np.int64)
    np.clip(n0, nlo, nhi, out=n0)
    jumps = _integer_jumps(model)

    inv_n = 1.0 / float(N)
    start = (tuple(n0.tolist()), int(y0))
    index: dict[tuple[tuple[int, ...], int], int] = {start: 0}
    states = [start]
    queue: deque = deque([start])
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    while queue:
        state = queue.popleft()
        n_t, y = state
        si = index[state]
        x = np.array(n_t, dtype=np.int64) * inv_n
        for j, tr in enumerate(model.transitions):
            r = tr.rate(x, y)
            if r <= RATE_EDGE_TOL:
                if r < NEG_RATE_TOL:
                    raise OracleError(
                        f"transition {j} has negative rate {r:.3g} at lattice state {n_t}"
                    )
                continue
            n_new = np.array(n_t, dtype=np.int64) + jumps[j]
            if np.any(n_new < nlo) or np.any(n_new > nhi):
                raise OracleError(
                    f"transition {j} leaves the state box from lattice state {n_t}"
                )
            y_new = y if tr.target_fast is None else int(tr.target_fast)
            key = (tuple(n_new.tolist()), y_new)
            if key == state:
                continue
            nxt = index.get(key)
            if nxt is None:
                if len(states) >= max_states:
                    raise OracleError(
                        f"reachable state space exceeds {max_states} states"
                    )
                nxt = len(states)
                index[key] = nxt
                states.append(key)
                queue.append(key)
            rows.append(si)
            cols.append(nxt)
            vals.append(float(N) * r)

    return FullChainIndex(
        model=model,
        N=int(N),
        states=states,
        index=index,
        rows=np.asarray(rows, dtype=np.int64),
        cols=np.asarray(cols, dtype=np.int64),
        vals=np.asarray(vals),
    )


def _require_single_closed_class(chain: FullChainIndex) -> None:
    """A finite chain has a unique stationary law iff exactly one strongly
    connected component has no outgoing edges. A near-singular bordered
    solve can otherwise return one of several stationary laws with a tiny
    residual, so this is checked structurally, not numerically."""
    n = chain.n_states
    if n == 1:
        return
    adj = sp.coo_matrix(
        (np.ones(chain.rows.size), (chain.rows, chain.cols)), shape=(n, n)
    ).tocsr()
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    closed = np.ones(n_comp, dtype=bool)
    li = labels[chain.rows]
    lj = labels[chain.cols]
    closed[li[li != lj]] = False
    n_closed = int(closed.sum())
    if n_closed != 1:
        raise OracleError(
            f"the reachable chain has {n_closed} closed communicating classes; "
            "no unique stationary law"
        )


@dataclass(eq=False)
class ExactStationary:
    """Stationary law of the finite-N chain over the reachable states."""

    chain: FullChainIndex
    pi: np.ndarray
    residual: float

    def expectation(self, h) -> float:
        """E[h(x)] under the stationary law; h is a callable of the slow state."""
        fn = getattr(h, "value_at", h)
        xs = self.chain.slow_states()
        values = np.array([float(fn(x)) for x in xs])
        return float(self.pi @ values)

    def mean_state(self) -> np.ndarray:
        return self.chain.slow_states().T @ self.pi


def exact_stationary(
    model: TwoTimescaleModel,
    N: int,
    x0=None,
    y0: int = 0,
    max_states: int = MAX_STATES,
) -> ExactStationary:
    """Solve pi Q = 0, pi . 1 = 1 on the reachable state space.

    The normalization replaces the last column of Q; the resulting system
    is solved dense for small chains and by sparse LU above DENSE_LIMIT
    states. Uniqueness of the stationary law is checked structurally first
    (exactly one closed communicating class); residual and negativity
    tolerances then guard the numerics.
    """
    chain = build_full_chain(model, N, x0=x0, y0=y0, max_states=max_states)
    n = chain.n_states
    _require_single_closed_class(chain)
    Q = chain.generator()
    qmax = float(np.max(np.abs(Q.data))) if Q.nnz else 0.0

    e = np.zeros(n)
    e[n - 1] = 1.0
    if n <= DENSE_LIMIT:
        M = Q.toarray()
        M[:, -1] = 1.0
        try:
            pi = np.linalg.solve(M.T, e)
        except np.linalg.LinAlgError:
            raise OracleError(
                "stationary solve is singular; the chain has no unique stationary law"
            ) from None
    else:
        M = Q.tolil()
        M[:, -1] = 1.0
        try:
            pi = splu(M.T.tocsc()).solve(e)
        except RuntimeError as exc:
            raise OracleError(f"sparse stationary solve failed: {exc}") from None

    worst = float(pi.min(initial=0.0))
    if worst < -1e-12:
        raise OracleError(
            f"stationary solve produced negative mass {worst:.3g}; "
            "the chain has multiple recurrent classes or is ill-conditioned"
        )
    np.clip(pi, 0.0, None, out=pi)
    total = pi.sum()
    if not np.isfinite(total) or total <= 0:
        raise OracleError("stationary solve produced no probability mass")
    pi /= total

    residual = float(np.max(np.abs(Q.T @ pi)))
    if residual > 1e-10 * max(1.0, qmax):
        raise OracleError(
            f"stationary residual {residual:.3g} exceeds tolerance; "
            "the chain has no unique stationary law"
        )
    return ExactStationary(chain=chain, pi=pi, residual=residual)


def exact_expectation(
    model: TwoTimescaleModel,
    N: int,
    h,
    x0=None,
    y0: int = 0,
    max_states: int = MAX_STATES,
) -> float:
    """Stationary expectation of h(x) for the finite-N chain."""
    return exact_stationary(model, N, x0=x0, y0=y0, max_states=max_states).expectation(h)
