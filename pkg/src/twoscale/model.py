"""Two-timescale population models declared as transition catalogs.

A model couples a slow population density x (dimension d_x, jumps of size
l/N) with a fast finite environment y. Each catalog entry carries the jump
direction l, the fast target y', and the rate function alpha_{l,y'}(x, y).
Rates are total functions of (x, y): entries that are disabled in a fast
state simply return 0 there, so kernel and drift assembly stay pure sums.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ModelValidationError

__all__ = [
    "AffineRate",
    "Transition",
    "TwoTimescaleModel",
    "CsmaSpec",
    "affine_transition",
    "enumerate_feasible_activations",
    "build_csma",
    "build_toy",
    "validate",
    "sample_states",
    "named_model",
    "model_from_descriptor",
    "load_model",
    "CSMA3_SPEC",
    "CSMA5_SPEC",
]

RATE_TOL = 1e-12  # sampled rates below -RATE_TOL count as violations


@dataclass(frozen=True, eq=False)
class AffineRate:
    """rate(x) = const + coeffs . x on the enabling fast states, 0 elsewhere.

    enabled is a frozenset of fast indices, or None meaning every fast state.
    """

    const: float
    coeffs: np.ndarray
    enabled: frozenset[int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def value(self, x: np.ndarray, y: int) -> float:
        if self.enabled is not None and y not in self.enabled:
            return 0.0
        return float(self.const + self.coeffs @ x)

    def gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        if self.enabled is not None and y not in self.enabled:
            return np.zeros_like(self.coeffs)
        return self.coeffs.copy()


@dataclass(eq=False)
class Transition:
    """One catalog entry (l, y', alpha).

    target_fast is the index of y' in the model's fast-state list; None means
    the fast state is unchanged by the jump (y' = y).
    """

    ell: np.ndarray
    target_fast: int | None
    rate: Callable[[np.ndarray, int], float]
    rate_gradient: Callable[[np.ndarray, int], np.ndarray] | None = None
    affine: AffineRate | None = None

    def __post_init__(self):
        self.ell = np.asarray(self.ell, dtype=float)


def affine_transition(
    ell: Sequence[float],
    target_fast: int | None,
    const: float,
    coeffs: Sequence[float],
    enabled: Iterable[int] | None = None,
) -> Transition:
    """Catalog entry with an affine rate; rate and gradient derived from it."""
    aff = AffineRate(
        const=float(const),
        coeffs=np.asarray(coeffs, dtype=float),
        enabled=None if enabled is None else frozenset(int(y) for y in enabled),
    )
    return Transition(
        ell=np.asarray(ell, dtype=float),
        target_fast=target_fast,
        rate=aff.value,
        rate_gradient=aff.gradient,
        affine=aff,
    )


@dataclass(eq=False)
class TwoTimescaleModel:
    """Immutable model description; shareable across threads.

    fast_states are opaque labels; all matrices over the fast space use their
    index order. state_projection optionally maps an arbitrary box point onto
    the model's valid region (used for validation sampling; the CSMA family
    is only defined on per-class monotone level vectors).
    """

    name: str
    d_x: int
    fast_states: tuple[Hashable, ...]
    transitions: tuple[Transition, ...]
    box_lower: np.ndarray
    box_upper: np.ndarray
    state_projection: Callable[[np.ndarray], np.ndarray] | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fast_states = tuple(self.fast_states)
        self.transitions = tuple(self.transitions)
        self.box_lower = np.asarray(self.box_lower, dtype=float)
        self.box_upper = np.asarray(self.box_upper, dtype=float)
        self._fast_index = {lab: i for i, lab in enumerate(self.fast_states)}
        self._tables = None

    @property
    def n_fast(self) -> int:
        return len(self.fast_states)

    @property
    def is_affine(self) -> bool:
        return all(t.affine is not None for t in self.transitions)

    def fast_index(self, label: Hashable) -> int:
        return self._fast_index[label]

    def project_state(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), self.box_lower, self.box_upper)
        if self.state_projection is not None:
            x = self.state_projection(x)
        return x

    def tables(self):
        """Cached affine evaluation tables, or None for non-affine models."""
        if self._tables is None and self.is_affine and self.transitions:
            from ._affine import AffineTables

            self._tables = AffineTables(self)
        return self._tables


# ---------------------------------------------------------------------------
# CSMA model family


@dataclass(frozen=True, eq=False)
class CsmaSpec:
    """Interference graph plus per-class arrival/back-off/completion rates."""

    adjacency: np.ndarray
    lambda_: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    buffer: int

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        object.__setattr__(self, "adjacency", adj)
        for name in ("lambda_", "nu", "mu"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_adjacency(adj)
        c = adj.shape[0]
        for name in ("lambda_", "nu", "mu"):
            vec = getattr(self, name)
            if vec.shape != (c,):
                raise ModelValidationError(f"{name} must have length {c}, got shape {vec.shape}")
            if not np.all(vec > 0):
                raise ModelValidationError(f"{name} must be strictly positive")
        if not (isinstance(self.buffer, (int, np.integer)) and self.buffer >= 1):
            raise ModelValidationError("buffer must be a positive integer")

    @property
    def n_classes(self) -> int:
        return self.adjacency.shape[0]


def _check_adjacency(adj: np.ndarray) -> None:
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ModelValidationError("adjacency must be a square matrix")
    if not np.isin(adj, (0, 1)).all():
        raise ModelValidationError("adjacency must be 0/1 valued")
    if not np.array_equal(adj, adj.T):
        raise ModelValidationError("adjacency must be symmetric")
    if np.any(np.diag(adj) != 0):
        raise ModelValidationError("adjacency must have a zero diagonal")


def enumerate_feasible_activations(adjacency) -> list[tuple[int, ...]]:
    """All independent sets of the interference graph, as 0/1 tuples.

    Lexicographic order; includes the empty activation.
    """
    adj = np.asarray(adjacency)
    _check_adjacency(adj)
    c = adj.shape[0]
    if c > 20:
        raise ModelValidationError(f"activation enumeration limited to 20 classes, got {c}")
    edges = [(i, j) for i in range(c) for j in range(i + 1, c) if adj[i, j]]
    out = []
    for bits in range(1 << c):
        y = tuple((bits >> (c - 1 - k)) & 1 for k in range(c))
        if all(not (y[i] and y[j]) for i, j in edges):
            out.append(y)
    return out


def _csma_projection(c: int, b: int) -> Callable[[np.ndarray], np.ndarray]:
    def project(x: np.ndarray) -> np.ndarray:
        levels = np.clip(np.asarray(x, dtype=float), 0.0, 1.0).reshape(c, b)
        return np.sort(levels, axis=1)[:, ::-1].reshape(-1)

    return project


def build_csma(spec: CsmaSpec) -> TwoTimescaleModel:
    """CSMA random-access model on an interference graph.

    Slow coordinate (c, b) at flat index c*B + (b-1) is the fraction of
    class-c servers holding at least b jobs, so levels decrease in b.
    Transitions: arrivals push level b up (y unchanged), a back-off of an
    idle unblocked class removes one job and activates it, a completion
    deactivates the class without moving x.
    """
    c_n = spec.n_classes
    b_n = int(spec.buffer)
    d_x = c_n * b_n
    activations = enumerate_feasible_activations(spec.adjacency)
    act_index = {y: i for i, y in enumerate(activations)}
    neighbors = [np.flatnonzero(spec.adjacency[c]).tolist() for c in range(c_n)]

    def flat(c: int, b: int) -> int:  # b is 1-based level
        return c * b_n + (b - 1)

    transitions: list[Transition] = []
    # Arrivals: l = +e_{c,b}, y unchanged, rate lambda_c (x_{c,b-1} - x_{c,b})
    # with the b=1 convention x_{c,0} = 1.
    for c in range(c_n):
        lam = float(spec.lambda_[c])
        for b in range(1, b_n + 1):
            ell = np.zeros(d_x)
            ell[flat(c, b)] = 1.0
            coeffs = np.zeros(d_x)
            coeffs[flat(c, b)] = -lam
            const = lam if b == 1 else 0.0
            if b > 1:
                coeffs[flat(c, b - 1)] = lam
            transitions.append(affine_transition(ell, None, const, coeffs))
    # Back-offs: l = -e_{c,b}, y -> y + e_c, enabled when c and all its
    # neighbors are inactive; rate nu_c (x_{c,b} - x_{c,b+1}), last level
    # nu_c x_{c,B}.
    for c in range(c_n):
        nu = float(spec.nu[c])
        enabled = frozenset(
            i
            for i, y in enumerate(activations)
            if y[c] == 0 and all(y[d] == 0 for d in neighbors[c])
        )
        for b in range(1, b_n + 1):
            ell = np.zeros(d_x)
            ell[flat(c, b)] = -1.0
            coeffs = np.zeros(d_x)
            coeffs[flat(c, b)] = nu
            if b < b_n:
                coeffs[flat(c, b + 1)] = -nu
            for y_idx in sorted(enabled):
                y = activations[y_idx]
                y_on = list(y)
                y_on[c] = 1
                transitions.append(
                    affine_transition(ell, act_index[tuple(y_on)], 0.0, coeffs, enabled={y_idx})
                )
    # Completions: l = 0, y -> y - e_c, enabled when c is active; rate mu_c.
    zero_ell = np.zeros(d_x)
    zero_coeffs = np.zeros(d_x)
    for c in range(c_n):
        mu = float(spec.mu[c])
        for y_idx, y in enumerate(activations):
            if y[c] == 1:
                y_off = list(y)
                y_off[c] = 0
                transitions.append(
                    affine_transition(
                        zero_ell, act_index[tuple(y_off)], mu, zero_coeffs, enabled={y_idx}
                    )
                )

    return TwoTimescaleModel(
        name="csma",
        d_x=d_x,
        fast_states=tuple(activations),
        transitions=tuple(transitions),
        box_lower=np.zeros(d_x),
        box_upper=np.ones(d_x),
        state_projection=_csma_projection(c_n, b_n),
        info={
            "family": "csma",
            "n_classes": c_n,
            "buffer": b_n,
            "spec": spec,
        },
    )


# ---------------------------------------------------------------------------
# Toy reference model (1-d slow state, 2 fast states)


def build_toy(
    lam: float = 1.0,
    mu: float = 1.0,
    alpha0: float = 2.0,
    alpha1: float = 1.0,
    beta: float = 3.0,
) -> TwoTimescaleModel:
    """Scalar toy model used by the exact-oracle validation protocol.

    Fast states {0, 1}; arrivals (l=+1) only while y=1 at rate lam*(1-x),
    departures (l=-1) at rate mu*x in any y, fast flips 0->1 at rate
    alpha0 + alpha1*x and 1->0 at rate beta. The x-dependent flip rate makes
    the average drift nonlinear through pi_1(x).
    """
    transitions = (
        affine_transition([1.0], None, lam, [-lam], enabled={1}),
        affine_transition([-1.0], None, 0.0, [mu]),
        affine_transition([0.0], 1, alpha0, [alpha1], enabled={0}),
        affine_transition([0.0], 0, beta, [0.0], enabled={1}),
    )
    return TwoTimescaleModel(
        name="toy",
        d_x=1,
        fast_states=(0, 1),
        transitions=transitions,
        box_lower=np.zeros(1),
        box_upper=np.ones(1),
        info={"family": "toy", "lam": lam, "mu": mu, "alpha0": alpha0, "alpha1": alpha1, "beta": beta},
    )


# ---------------------------------------------------------------------------
# Validation


def sample_states(model: TwoTimescaleModel, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
    """Random valid states: uniform box samples pushed through the projection.

    margin > 0 shrinks the box to keep samples strictly interior.
    """
    lo = model.box_lower + margin * (model.box_upper - model.box_lower)
    hi = model.box_upper - margin * (model.box_upper - model.box_lower)
    pts = rng.uniform(lo, hi, size=(count, model.d_x))
    if model.state_projection is not None:
        pts = np.array([model.state_projection(p) for p in pts])
    return pts


def _validation_grid(model: TwoTimescaleModel) -> np.ndarray:
    """Low-discrepancy points plus box corners, mapped onto the valid region."""
    d = model.d_x
    lo, hi = model.box_lower, model.box_upper
    n_corner_dims = min(d, 10)
    corners = []
    for bits in range(1 << n_corner_dims):
        pt = lo.copy()
        for k in range(n_corner_dims):
            if (bits >> k) & 1:
                pt[k] = hi[k]
        corners.append(pt)
    halton = qmc.Halton(d, scramble=False).random(100)
    pts = np.vstack([np.array(corners), lo + halton * (hi - lo)])
    if model.state_projection is not None:
        pts = np.array([model.state_projection(p) for p in pts])
    return pts


def validate(model: TwoTimescaleModel) -> list[str]:
    """Structural and sampled-rate checks; returns violations, [] = pass."""
    violations: list[str] = []
    m = model.n_fast
    if m == 0:
        violations.append("fast_states is empty")
    if len(set(model.fast_states)) != m:
        violations.append("fast_states contains duplicate labels")
    if model.box_lower.shape != (model.d_x,) or model.box_upper.shape != (model.d_x,):
        violations.append("box bounds do not match d_x")
        return violations
    if np.any(model.box_lower > model.box_upper):
        violations.append("box_lower exceeds box_upper")
    for idx, t in enumerate(model.transitions):
        if t.ell.shape != (model.d_x,):
            violations.append(f"transition {idx}: ell has shape {t.ell.shape}, expected ({model.d_x},)")
        elif not np.all(np.isfinite(t.ell)):
            violations.append(f"transition {idx}: ell is not finite")
        if t.target_fast is not None and not (0 <= t.target_fast < m):
            violations.append(
                f"transition {idx}: target fast state {t.target_fast} not in the fast-state list"
            )
        if not callable(t.rate):
            violations.append(f"transition {idx}: rate is not callable")
    if violations:
        return violations

    pts = _validation_grid(model)
    tables = model.tables()
    if tables is not None:
        # rate(x) = const + coeffs.x wherever enabled; vectorize over points
        vals = tables.c0[None, :] + pts @ tables.coef.T  # (n_pts, n_t)
        has_enabled = tables.enabled_counts > 0
        bad = (vals < -RATE_TOL) & has_enabled[None, :]
        for j in np.flatnonzero(bad.any(axis=0)):
            p_idx = int(np.argmin(vals[:, j]))
            violations.append(
                f"transition {int(j)}: negative rate {vals[p_idx, j]:.3g} "
                f"at sampled state {np.array2string(pts[p_idx], precision=4, threshold=8)}"
            )
        return violations

    for idx, t in enumerate(model.transitions):
        worst = None
        for p in pts:
            for y in range(m):
                r = t.rate(p, y)
                if r < -RATE_TOL and (worst is None or r < worst[0]):
                    worst = (r, p, y)
        if worst is not None:
            violations.append(
                f"transition {idx}: negative rate {worst[0]:.3g} at sampled state "
                f"{np.array2string(worst[1], precision=4, threshold=8)}, fast state {worst[2]}"
            )
    return violations


# ---------------------------------------------------------------------------
# Named models and JSON descriptors

CSMA3_SPEC = CsmaSpec(
    adjacency=np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]),
    lambda_=np.array([0.4, 0.2, 0.5]),
    nu=np.array([1.2, 2.0, 1.5]),
    mu=np.array([1.4, 1.3, 1.7]),
    buffer=10,
)

CSMA5_SPEC = CsmaSpec(
    adjacency=np.array(
        [
            [0, 1, 1, 1, 0],
            [1, 0, 0, 0, 0],
            [1, 0, 0, 0, 1],
            [1, 0, 0, 0, 1],
            [0, 0, 1, 1, 0],
        ]
    ),
    lambda_=np.array([0.5, 0.7, 0.7, 0.6, 0.4]),
    nu=np.array([4.0, 3.0, 3.0, 3.0, 3.0]),
    mu=np.array([3.0, 3.0, 2.0, 4.0, 2.0]),
    buffer=10,
)

_NAMED = {
    "toy": build_toy,
    "csma3": lambda: build_csma(CSMA3_SPEC),
    "csma5": lambda: build_csma(CSMA5_SPEC),
}


def named_model(name: str) -> TwoTimescaleModel:
    try:
        builder = _NAMED[name]
    except KeyError:
        raise ModelValidationError(
            f"unknown model name {name!r}; known names: {sorted(_NAMED)}"
        ) from None
    return builder()


_CSMA_KEYS = {"adjacency", "lambda", "nu", "mu", "buffer"}


def model_from_descriptor(descriptor: dict) -> TwoTimescaleModel:
    """Build a model from a JSON-style descriptor: {"csma": {...}}."""
    if not isinstance(descriptor, dict):
        raise ModelValidationError("model descriptor must be a JSON object")
    keys = set(descriptor)
    if keys != {"csma"}:
        unknown = sorted(keys - {"csma"})
        if unknown:
            raise ModelValidationError(f"unknown model descriptor key {unknown[0]!r}")
        raise ModelValidationError("model descriptor must contain the key 'csma'")
    body = descriptor["csma"]
    if not isinstance(body, dict):
        raise ModelValidationError("key 'csma' must map to an object")
    missing = sorted(_CSMA_KEYS - set(body))
    if missing:
        raise ModelValidationError(f"missing csma key {missing[0]!r}")
    extra = sorted(set(body) - _CSMA_KEYS)
    if extra:
        raise ModelValidationError(f"unknown csma key {extra[0]!r}")
    try:
        spec = CsmaSpec(
            adjacency=np.asarray(body["adjacency"]),
            lambda_=np.asarray(body["lambda"], dtype=float),
            nu=np.asarray(body["nu"], dtype=float),
            mu=np.asarray(body["mu"], dtype=float),
            buffer=int(body["buffer"]),
        )
    except ModelValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelValidationError(f"malformed csma descriptor: {exc}") from exc
    return build_csma(spec)


def load_model(source: str) -> TwoTimescaleModel:
    """Resolve a named built-in model or a JSON descriptor file path."""
    if source in _NAMED:
        return named_model(source)
    try:
        with open(source, "r", encoding="utf-8") as fh:
            descriptor = json.load(fh)
    except FileNotFoundError:
        raise ModelValidationError(
            f"model {source!r} is neither a known name ({sorted(_NAMED)}) nor a readable file"
        ) from None
    except json.JSONDecodeError as exc:
        raise ModelValidationError(f"malformed JSON in {source!r}: {exc}") from exc
    return model_from_descriptor(descriptor)
