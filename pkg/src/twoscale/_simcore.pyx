# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop; the hot twin of the pure-Python core.

Operation-for-operation identical to _simcore_py (same order, same libm
log, no fused multiply-add thanks to -ffp-contract=off), so both
backends produce bit-identical trajectories. Keep the two files in
lockstep when editing either.
"""

from libc.math cimport log, NAN
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

MASK64 = (1 << 64) - 1
NEG_RATE_TOL = -1e-9
INV_TWO53 = 2.0**-53

STATUS_OK = 0
STATUS_ABSORBED = 1
STATUS_ABSORBED_MEASURE = 2
STATUS_NEGATIVE_RATE = 3
STATUS_BOX = 4
STATUS_BUDGET = 5

BACKEND = "compiled"

cdef double NEG_TOL_C = -1e-9
cdef double INV53 = 2.0**-53


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _xoshiro_next(uint64_t* s) nogil:
    cdef uint64_t result = _rotl(s[1] * <uint64_t>5, 7) * <uint64_t>9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


def steady_state_avg(
    double[::1] c0,
    int64_t[::1] coef_ptr,
    int64_t[::1] coef_idx,
    double[::1] coef_val,
    int64_t[::1] ell_ptr,
    int64_t[::1] ell_idx,
    int64_t[::1] ell_val,
    int64_t[::1] target,
    int64_t[::1] y_ptr,
    int64_t[::1] y_trans,
    long long max_degree,
    int64_t[::1] n,
    long long y,
    int64_t[::1] nlo,
    int64_t[::1] nhi,
    double n_pop,
    double[::1] dh,
    double hval0,
    long long warmup_events,
    long long measure_events,
    double time_limit,
    uint64_t[::1] rng_state,
):
    """Time-average a linear observable; see the pure-Python twin for details."""
    cdef uint64_t s[4]
    s[0] = rng_state[0]
    s[1] = rng_state[1]
    s[2] = rng_state[2]
    s[3] = rng_state[3]

    cdef double inv_n = 1.0 / n_pop
    cdef double* rbuf = <double*> malloc(max_degree * sizeof(double))
    if rbuf == NULL:
        raise MemoryError()
    cdef double hval = hval0
    cdef double acc = 0.0
    cdef double t_meas = 0.0
    cdef long long events_done = 0
    cdef int status = STATUS_OK
    cdef bint measuring = 0
    cdef long long remaining = warmup_events

    cdef long long base, n_enabled, k, j, sL, idx, last_pos, sel, tj
    cdef double r, rtot, bad, u1, u2, tau, target_val, a
    cdef uint64_t out

    try:
        while True:
            if remaining == 0:
                if measuring:
                    break
                measuring = 1
                remaining = measure_events
                if remaining == 0:
                    break

            base = y_ptr[y]
            n_enabled = y_ptr[y + 1] - base
            rtot = 0.0
            last_pos = -1
            bad = 0.0
            for k in range(n_enabled):
                j = y_trans[base + k]
                r = c0[j]
                for sL in range(coef_ptr[j], coef_ptr[j + 1]):
                    r += coef_val[sL] * (n[coef_idx[sL]] * inv_n)
                if r < 0.0:
                    if r < NEG_TOL_C:
                        bad = r
                        break
                    r = 0.0
                rbuf[k] = r
                if r > 0.0:
                    last_pos = k
                rtot += r
            if bad < 0.0:
                status = STATUS_NEGATIVE_RATE
                break
            if rtot <= 0.0 or last_pos < 0:
                status = STATUS_ABSORBED_MEASURE if measuring else STATUS_ABSORBED
                break

            out = _xoshiro_next(s)
            u1 = (<double>((out >> 11) + 1)) * INV53
            tau = -log(u1) / (rtot * n_pop)

            if measuring:
                if t_meas + tau > time_limit:
                    acc += hval * (time_limit - t_meas)
                    t_meas = time_limit
                    break
                acc += hval * tau
                t_meas += tau

            out = _xoshiro_next(s)
            u2 = (<double>(out >> 11)) * INV53
            target_val = u2 * rtot
            a = 0.0
            sel = -1
            for k in range(n_enabled):
                a += rbuf[k]
                if target_val < a:
                    sel = k
                    break
            if sel < 0:
                sel = last_pos
            j = y_trans[base + sel]

            for sL in range(ell_ptr[j], ell_ptr[j + 1]):
                idx = ell_idx[sL]
                n[idx] += ell_val[sL]
                if n[idx] < nlo[idx] or n[idx] > nhi[idx]:
                    status = STATUS_BOX
            if status == STATUS_BOX:
                break
            tj = target[j]
            if tj >= 0:
                y = tj
            hval += dh[j]
            events_done += 1
            remaining -= 1
    finally:
        free(rbuf)

    rng_state[0] = s[0]
    rng_state[1] = s[1]
    rng_state[2] = s[2]
    rng_state[3] = s[3]
    cdef double estimate = acc / t_meas if t_meas > 0.0 else NAN
    return status, estimate, t_meas, y, events_done


def transient_grid(
    double[::1] c0,
    int64_t[::1] coef_ptr,
    int64_t[::1] coef_idx,
    double[::1] coef_val,
    int64_t[::1] ell_ptr,
    int64_t[::1] ell_idx,
    int64_t[::1] ell_val,
    int64_t[::1] target,
    int64_t[::1] y_ptr,
    int64_t[::1] y_trans,
    long long max_degree,
    int64_t[::1] n,
    long long y,
    int64_t[::1] nlo,
    int64_t[::1] nhi,
    double n_pop,
    double[::1] dh,
    double hval0,
    double[::1] t_grid,
    double[::1] out_h,
    long long max_events,
    uint64_t[::1] rng_state,
):
    """Record a linear observable on a time grid; see the pure-Python twin."""
    cdef uint64_t s[4]
    s[0] = rng_state[0]
    s[1] = rng_state[1]
    s[2] = rng_state[2]
    s[3] = rng_state[3]

    cdef double inv_n = 1.0 / n_pop
    cdef long long n_grid = t_grid.shape[0]
    cdef double* rbuf = <double*> malloc(max_degree * sizeof(double))
    if rbuf == NULL:
        raise MemoryError()
    cdef double hval = hval0
    cdef double t = 0.0
    cdef long long pos = 0
    cdef long long events_done = 0
    cdef int status = STATUS_OK

    cdef long long base, n_enabled, k, j, sL, idx, last_pos, sel, tj
    cdef double r, rtot, bad, u1, u2, tau, t_next, target_val, a
    cdef uint64_t out

    try:
        while pos < n_grid:
            if events_done >= max_events:
                status = STATUS_BUDGET
                break

            base = y_ptr[y]
            n_enabled = y_ptr[y + 1] - base
            rtot = 0.0
            last_pos = -1
            bad = 0.0
            for k in range(n_enabled):
                j = y_trans[base + k]
                r = c0[j]
                for sL in range(coef_ptr[j], coef_ptr[j + 1]):
                    r += coef_val[sL] * (n[coef_idx[sL]] * inv_n)
                if r < 0.0:
                    if r < NEG_TOL_C:
                        bad = r
                        break
                    r = 0.0
                rbuf[k] = r
                if r > 0.0:
                    last_pos = k
                rtot += r
            if bad < 0.0:
                status = STATUS_NEGATIVE_RATE
                break
            if rtot <= 0.0 or last_pos < 0:
                while pos < n_grid:
                    out_h[pos] = hval
                    pos += 1
                status = STATUS_ABSORBED
                break

            out = _xoshiro_next(s)
            u1 = (<double>((out >> 11) + 1)) * INV53
            tau = -log(u1) / (rtot * n_pop)
            t_next = t + tau

            while pos < n_grid and t_grid[pos] < t_next:
                out_h[pos] = hval
                pos += 1
            if pos >= n_grid:
                t = t_next
                break

            out = _xoshiro_next(s)
            u2 = (<double>(out >> 11)) * INV53
            target_val = u2 * rtot
            a = 0.0
            sel = -1
            for k in range(n_enabled):
                a += rbuf[k]
                if target_val < a:
                    sel = k
                    break
            if sel < 0:
                sel = last_pos
            j = y_trans[base + sel]

            for sL in range(ell_ptr[j], ell_ptr[j + 1]):
                idx = ell_idx[sL]
                n[idx] += ell_val[sL]
                if n[idx] < nlo[idx] or n[idx] > nhi[idx]:
                    status = STATUS_BOX
            if status == STATUS_BOX:
                break
            tj = target[j]
            if tj >= 0:
                y = tj
            hval += dh[j]
            t = t_next
            events_done += 1
    finally:
        free(rbuf)

    rng_state[0] = s[0]
    rng_state[1] = s[1]
    rng_state[2] = s[2]
    rng_state[3] = s[3]
    return status, y, t, events_done, pos


def run_path(
    double[::1] c0,
    int64_t[::1] coef_ptr,
    int64_t[::1] coef_idx,
    double[::1] coef_val,
    int64_t[::1] ell_ptr,
    int64_t[::1] ell_idx,
    int64_t[::1] ell_val,
    int64_t[::1] target,
    int64_t[::1] y_ptr,
    int64_t[::1] y_trans,
    long long max_degree,
    int64_t[::1] n,
    long long y,
    int64_t[::1] nlo,
    int64_t[::1] nhi,
    double n_pop,
    double t0,
    double t_end,
    double[::1] out_t,
    int64_t[::1] out_j,
    int64_t[::1] out_y,
    uint64_t[::1] rng_state,
):
    """Record every event up to t_end; see the pure-Python twin for details."""
    cdef uint64_t s[4]
    s[0] = rng_state[0]
    s[1] = rng_state[1]
    s[2] = rng_state[2]
    s[3] = rng_state[3]

    cdef double inv_n = 1.0 / n_pop
    cdef long long capacity = out_t.shape[0]
    cdef double* rbuf = <double*> malloc(max_degree * sizeof(double))
    if rbuf == NULL:
        raise MemoryError()
    cdef double t = t0
    cdef long long count = 0
    cdef int status = STATUS_OK

    cdef long long base, n_enabled, k, j, sL, idx, last_pos, sel, tj
    cdef double r, rtot, bad, u1, u2, tau, t_next, target_val, a
    cdef uint64_t out

    try:
        while True:
            if count >= capacity:
                status = STATUS_BUDGET
                break

            base = y_ptr[y]
            n_enabled = y_ptr[y + 1] - base
            rtot = 0.0
            last_pos = -1
            bad = 0.0
            for k in range(n_enabled):
                j = y_trans[base + k]
                r = c0[j]
                for sL in range(coef_ptr[j], coef_ptr[j + 1]):
                    r += coef_val[sL] * (n[coef_idx[sL]] * inv_n)
                if r < 0.0:
                    if r < NEG_TOL_C:
                        bad = r
                        break
                    r = 0.0
                rbuf[k] = r
                if r > 0.0:
                    last_pos = k
                rtot += r
            if bad < 0.0:
                status = STATUS_NEGATIVE_RATE
                break
            if rtot <= 0.0 or last_pos < 0:
                status = STATUS_ABSORBED
                break

            out = _xoshiro_next(s)
            u1 = (<double>((out >> 11) + 1)) * INV53
            tau = -log(u1) / (rtot * n_pop)
            t_next = t + tau
            if t_next > t_end:
                t = t_end
                break

            out = _xoshiro_next(s)
            u2 = (<double>(out >> 11)) * INV53
            target_val = u2 * rtot
            a = 0.0
            sel = -1
            for k in range(n_enabled):
                a += rbuf[k]
                if target_val < a:
                    sel = k
                    break
            if sel < 0:
                sel = last_pos
            j = y_trans[base + sel]

            for sL in range(ell_ptr[j], ell_ptr[j + 1]):
                idx = ell_idx[sL]
                n[idx] += ell_val[sL]
                if n[idx] < nlo[idx] or n[idx] > nhi[idx]:
                    status = STATUS_BOX
            if status == STATUS_BOX:
                break
            tj = target[j]
            if tj >= 0:
                y = tj
            out_t[count] = t_next
            out_j[count] = j
            out_y[count] = y
            t = t_next
            count += 1
    finally:
        free(rbuf)

    rng_state[0] = s[0]
    rng_state[1] = s[1]
    rng_state[2] = s[2]
    rng_state[3] = s[3]
    return status, y, t, count
