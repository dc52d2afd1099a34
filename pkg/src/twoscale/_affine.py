"""Precomputed evaluation tables for models with affine rates.

For an affine catalog every derived object is affine in x, so the kernel,
the per-state drift matrix, and their exact x-derivatives reduce to constant
tensors contracted with x. The tables also carry the flat (transition, fast
state) pair arrays used by the averaged second-moment and coupling sums, and
the per-fast-state CSR layout consumed by the simulation cores.
"""

from __future__ import annotations

import numpy as np


class AffineTables:
    """Derived constants of an affine model; built once, read-only."""

    def __init__(self, model):
        m = model.n_fast
        d = model.d_x
        n_t = len(model.transitions)
        self.m = m
        self.d_x = d
        self.n_t = n_t

        self.c0 = np.zeros(n_t)
        self.coef = np.zeros((n_t, d))
        self.ell = np.zeros((n_t, d))
        self.target = np.full(n_t, -1, dtype=np.int64)
        self.enabled_mask = np.zeros((n_t, m), dtype=bool)
        for j, t in enumerate(model.transitions):
            aff = t.affine
            self.c0[j] = aff.const
            self.coef[j] = aff.coeffs
            self.ell[j] = t.ell
            if t.target_fast is not None:
                self.target[j] = t.target_fast
            if aff.enabled is None:
                self.enabled_mask[j, :] = True
            else:
                for y in aff.enabled:
                    self.enabled_mask[j, y] = True
        self.enabled_counts = self.enabled_mask.sum(axis=1)

        ell_rounded = np.rint(self.ell)
        self.has_integer_ell = bool(np.all(np.abs(self.ell - ell_rounded) < 1e-12))
        self.ell_int = ell_rounded.astype(np.int64) if self.has_integer_ell else None

        # Kernel K(x) = Kc + Kl . x and drift matrix F(x) = Fc + Fl . x,
        # with exact constant derivatives dK[i] = Kl[:, :, i].
        self.Kc = np.zeros((m, m))
        self.Kl = np.zeros((m, m, d))
        self.Fc = np.zeros((m, d))
        self.Fl = np.zeros((m, d, d))
        for j in range(n_t):
            tgt_j = self.target[j]
            for y in np.flatnonzero(self.enabled_mask[j]):
                tgt = int(tgt_j) if tgt_j >= 0 else int(y)
                if tgt != y:
                    self.Kc[y, tgt] += self.c0[j]
                    self.Kl[y, tgt] += self.coef[j]
                    self.Kc[y, y] -= self.c0[j]
                    self.Kl[y, y] -= self.coef[j]
                self.Fc[y] += self.c0[j] * self.ell[j]
                self.Fl[y] += np.outer(self.ell[j], self.coef[j])
        self.dK = np.ascontiguousarray(self.Kl.transpose(2, 0, 1))
        self.dF = np.ascontiguousarray(self.Fl.transpose(2, 0, 1))

        # Flat enabled (transition, fast state) pairs; tgt resolves stays.
        pj, py = np.nonzero(self.enabled_mask)
        self.pair_j = pj.astype(np.int64)
        self.pair_y = py.astype(np.int64)
        self.pair_tgt = np.where(self.target[pj] >= 0, self.target[pj], py).astype(np.int64)

        # CSR over fast states for the event loop: transitions enabled at y,
        # in catalog order.
        order = np.lexsort((self.pair_j, self.pair_y))
        by_y = self.pair_j[order]
        counts = np.bincount(self.pair_y[order], minlength=m)
        self.y_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(counts, out=self.y_ptr[1:])
        self.y_trans = by_y.astype(np.int64)
        self.max_degree = int(counts.max()) if counts.size else 0

        # Sparse per-transition layouts for the simulation cores.
        self.coef_ptr, self.coef_idx, self.coef_val = _csr_rows(self.coef)
        if self.has_integer_ell:
            ptr, idx, val = _csr_rows(self.ell_int)
            self.ell_ptr, self.ell_idx = ptr, idx
            self.ell_val = val.astype(np.int64)
        else:
            self.ell_ptr = self.ell_idx = self.ell_val = None

    def rates(self, x: np.ndarray) -> np.ndarray:
        """Per-transition affine values, ignoring the enabling sets."""
        return self.c0 + self.coef @ x

    def rate_matrix(self, x: np.ndarray) -> np.ndarray:
        """alpha_j(x, y) as an (n_t, m) array."""
        return self.rates(x)[:, None] * self.enabled_mask

    def kernel(self, x: np.ndarray) -> np.ndarray:
        return self.Kc + self.Kl @ x

    def drift_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.Fc + self.Fl @ x


def _csr_rows(mat: np.ndarray):
    """Row-wise sparse layout (ptr, col indices, values) of a dense matrix."""
    rows, cols = np.nonzero(mat)
    counts = np.bincount(rows, minlength=mat.shape[0])
    ptr = np.zeros(mat.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, cols.astype(np.int64), mat[rows, cols].astype(np.float64)
