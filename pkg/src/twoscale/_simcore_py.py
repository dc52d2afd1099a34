"""Pure-Python event loop, the fallback twin of the compiled core.

Every floating-point operation mirrors the compiled extension exactly:
same operation order, same libm calls, no fused multiply-add. Both
backends therefore produce bit-identical trajectories from the same
seed state. Keep the two files in lockstep when editing either.

State is tracked as integer counts n with x = n/N, so the slow state
never accumulates rounding error. Rates are affine in x and evaluated
from sparse per-transition coefficient rows. The generator is
xoshiro256** seeded elsewhere; u1 in (0, 1] feeds the log for holding
times, u2 in [0, 1) selects the jump by a cumulative scan in which
zero-rate entries can never win.
"""

from __future__ import annotations

from math import log

MASK64 = (1 << 64) - 1
NEG_RATE_TOL = -1e-9
INV_TWO53 = 2.0**-53

STATUS_OK = 0
STATUS_ABSORBED = 1
STATUS_ABSORBED_MEASURE = 2
STATUS_NEGATIVE_RATE = 3
STATUS_BOX = 4
STATUS_BUDGET = 5

BACKEND = "python"


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def steady_state_avg(
    c0,
    coef_ptr,
    coef_idx,
    coef_val,
    ell_ptr,
    ell_idx,
    ell_val,
    target,
    y_ptr,
    y_trans,
    max_degree,
    n,
    y,
    nlo,
    nhi,
    n_pop,
    dh,
    hval0,
    warmup_events,
    measure_events,
    time_limit,
    rng_state,
):
    """Time-average a linear observable over a measurement window.

    Runs warmup_events events without accumulating, then measure_events
    more (or up to time_limit of simulated time, whichever ends first,
    with the final holding interval truncated at the limit). Returns
    (status, estimate, measured_time, y, events_done); n and rng_state
    are updated in place.
    """
    c0_l = c0.tolist()
    cp = coef_ptr.tolist()
    ci = coef_idx.tolist()
    cv = coef_val.tolist()
    ep = ell_ptr.tolist()
    ei = ell_idx.tolist()
    ev = ell_val.tolist()
    tgt_l = target.tolist()
    yp = y_ptr.tolist()
    yt = y_trans.tolist()
    nn = n.tolist()
    lo = nlo.tolist()
    hi = nhi.tolist()
    dh_l = dh.tolist()
    s0, s1, s2, s3 = rng_state.tolist()

    inv_n = 1.0 / n_pop
    rbuf = [0.0] * max_degree
    hval = hval0
    acc = 0.0
    t_meas = 0.0
    events_done = 0
    status = STATUS_OK
    measuring = False
    remaining = warmup_events

    while True:
        if remaining == 0:
            if measuring:
                break
            measuring = True
            remaining = measure_events
            if remaining == 0:
                break

        base = yp[y]
        n_enabled = yp[y + 1] - base
        rtot = 0.0
        last_pos = -1
        bad = 0.0
        for k in range(n_enabled):
            j = yt[base + k]
            r = c0_l[j]
            for s in range(cp[j], cp[j + 1]):
                r += cv[s] * (nn[ci[s]] * inv_n)
            if r < 0.0:
                if r < NEG_RATE_TOL:
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

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u1 = ((out >> 11) + 1) * INV_TWO53
        tau = -log(u1) / (rtot * n_pop)

        if measuring:
            if t_meas + tau > time_limit:
                acc += hval * (time_limit - t_meas)
                t_meas = time_limit
                break
            acc += hval * tau
            t_meas += tau

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u2 = (out >> 11) * INV_TWO53
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
        j = yt[base + sel]

        for s in range(ep[j], ep[j + 1]):
            idx = ei[s]
            nn[idx] += ev[s]
            if nn[idx] < lo[idx] or nn[idx] > hi[idx]:
                status = STATUS_BOX
        if status == STATUS_BOX:
            break
        tj = tgt_l[j]
        if tj >= 0:
            y = tj
        hval += dh_l[j]
        events_done += 1
        remaining -= 1

    for i, v in enumerate(nn):
        n[i] = v
    rng_state[0], rng_state[1], rng_state[2], rng_state[3] = s0, s1, s2, s3
    estimate = acc / t_meas if t_meas > 0.0 else float("nan")
    return status, estimate, t_meas, y, events_done


def transient_grid(
    c0,
    coef_ptr,
    coef_idx,
    coef_val,
    ell_ptr,
    ell_idx,
    ell_val,
    target,
    y_ptr,
    y_trans,
    max_degree,
    n,
    y,
    nlo,
    nhi,
    n_pop,
    dh,
    hval0,
    t_grid,
    out_h,
    max_events,
    rng_state,
):
    """Record a linear observable at fixed times along one trajectory.

    out_h[i] receives the value held at t_grid[i] (grids must be sorted
    ascending). An absorbed chain freezes: remaining grid points get the
    final value and the status still reports the absorption. Returns
    (status, y, t, events_done, grid_filled); n and rng_state update in
    place.
    """
    c0_l = c0.tolist()
    cp = coef_ptr.tolist()
    ci = coef_idx.tolist()
    cv = coef_val.tolist()
    ep = ell_ptr.tolist()
    ei = ell_idx.tolist()
    ev = ell_val.tolist()
    tgt_l = target.tolist()
    yp = y_ptr.tolist()
    yt = y_trans.tolist()
    nn = n.tolist()
    lo = nlo.tolist()
    hi = nhi.tolist()
    dh_l = dh.tolist()
    grid = t_grid.tolist()
    s0, s1, s2, s3 = rng_state.tolist()

    inv_n = 1.0 / n_pop
    n_grid = len(grid)
    rbuf = [0.0] * max_degree
    hval = hval0
    t = 0.0
    pos = 0
    events_done = 0
    status = STATUS_OK

    while pos < n_grid:
        if events_done >= max_events:
            status = STATUS_BUDGET
            break

        base = yp[y]
        n_enabled = yp[y + 1] - base
        rtot = 0.0
        last_pos = -1
        bad = 0.0
        for k in range(n_enabled):
            j = yt[base + k]
            r = c0_l[j]
            for s in range(cp[j], cp[j + 1]):
                r += cv[s] * (nn[ci[s]] * inv_n)
            if r < 0.0:
                if r < NEG_RATE_TOL:
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

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u1 = ((out >> 11) + 1) * INV_TWO53
        tau = -log(u1) / (rtot * n_pop)
        t_next = t + tau

        while pos < n_grid and grid[pos] < t_next:
            out_h[pos] = hval
            pos += 1
        if pos >= n_grid:
            t = t_next
            break

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u2 = (out >> 11) * INV_TWO53
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
        j = yt[base + sel]

        for s in range(ep[j], ep[j + 1]):
            idx = ei[s]
            nn[idx] += ev[s]
            if nn[idx] < lo[idx] or nn[idx] > hi[idx]:
                status = STATUS_BOX
        if status == STATUS_BOX:
            break
        tj = tgt_l[j]
        if tj >= 0:
            y = tj
        hval += dh_l[j]
        t = t_next
        events_done += 1

    for i, v in enumerate(nn):
        n[i] = v
    rng_state[0], rng_state[1], rng_state[2], rng_state[3] = s0, s1, s2, s3
    return status, y, t, events_done, pos


def run_path(
    c0,
    coef_ptr,
    coef_idx,
    coef_val,
    ell_ptr,
    ell_idx,
    ell_val,
    target,
    y_ptr,
    y_trans,
    max_degree,
    n,
    y,
    nlo,
    nhi,
    n_pop,
    t0,
    t_end,
    out_t,
    out_j,
    out_y,
    rng_state,
):
    """Record every event (time, transition index, new fast state) up to t_end.

    Stops cleanly once the next jump would land past t_end, leaving that
    jump undrawn. Capacity is len(out_t); exceeding it reports a budget
    status so the caller can resume from the returned state. Returns
    (status, y, t, events_recorded); n and rng_state update in place.
    """
    c0_l = c0.tolist()
    cp = coef_ptr.tolist()
    ci = coef_idx.tolist()
    cv = coef_val.tolist()
    ep = ell_ptr.tolist()
    ei = ell_idx.tolist()
    ev = ell_val.tolist()
    tgt_l = target.tolist()
    yp = y_ptr.tolist()
    yt = y_trans.tolist()
    nn = n.tolist()
    lo = nlo.tolist()
    hi = nhi.tolist()
    s0, s1, s2, s3 = rng_state.tolist()

    inv_n = 1.0 / n_pop
    capacity = len(out_t)
    rbuf = [0.0] * max_degree
    t = t0
    count = 0
    status = STATUS_OK

    while True:
        if count >= capacity:
            status = STATUS_BUDGET
            break

        base = yp[y]
        n_enabled = yp[y + 1] - base
        rtot = 0.0
        last_pos = -1
        bad = 0.0
        for k in range(n_enabled):
            j = yt[base + k]
            r = c0_l[j]
            for s in range(cp[j], cp[j + 1]):
                r += cv[s] * (nn[ci[s]] * inv_n)
            if r < 0.0:
                if r < NEG_RATE_TOL:
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

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u1 = ((out >> 11) + 1) * INV_TWO53
        tau = -log(u1) / (rtot * n_pop)
        t_next = t + tau
        if t_next > t_end:
            t = t_end
            break

        out = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t17 = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t17
        s3 = _rotl(s3, 45)
        u2 = (out >> 11) * INV_TWO53
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
        j = yt[base + sel]

        for s in range(ep[j], ep[j + 1]):
            idx = ei[s]
            nn[idx] += ev[s]
            if nn[idx] < lo[idx] or nn[idx] > hi[idx]:
                status = STATUS_BOX
        if status == STATUS_BOX:
            break
        tj = tgt_l[j]
        if tj >= 0:
            y = tj
        out_t[count] = t_next
        out_j[count] = j
        out_y[count] = y
        t = t_next
        count += 1

    for i, v in enumerate(nn):
        n[i] = v
    rng_state[0], rng_state[1], rng_state[2], rng_state[3] = s0, s1, s2, s3
    return status, y, t, count
