"""Compiled sparse-dense row reduction over Z/pZ lanes.

Rows are CSR (ptr, cols, vals) with ``vals`` of shape (nnz, lanes): one
residue per prime of the batch.  A lower row is scattered into a dense
accumulator, eliminated column by column against the pivots, and gathered
back.  ``flavor`` selects the update rule (0 generic, 1 signed, 2 delayed).

All primes must be below 2**31 so that every intermediate fits in int64.
"""

import numpy as np
from numba import njit

GENERIC, SIGNED, DELAYED = 0, 1, 2

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(cache=True, inline="always")
def mulhi64(a, b):
    alo = a & _M32
    ahi = a >> _S32
    blo = b & _M32
    bhi = b >> _S32
    ll = alo * blo
    hl = ahi * blo
    lh = alo * bhi
    hh = ahi * bhi
    cross = (ll >> _S32) + (hl & _M32) + lh
    return hh + (hl >> _S32) + (cross >> _S32)


@njit(cache=True, inline="always")
def magic_reduce(x, p, m, sh):
    """x mod p for 0 <= x < 2**63 via the multiply-shift quotient."""
    ux = np.uint64(x)
    q = mulhi64(ux, m) >> sh
    return np.int64(ux - q * np.uint64(p))


@njit(cache=True)
def inv_mod64(a, p):
    t, newt = 0, 1
    r, newr = p, a
    while newr != 0:
        q = r // newr
        t, newt = newt, t - q * newt
        r, newr = newr, r - q * newr
    if t < 0:
        t += p
    return t


@njit(cache=True)
def dot_mod(xs, ys, p, m, sh, flavor, dlimit):
    """Dot product of residue vectors mod p under one arithmetic flavor.

    Uses the same update rules as the row kernel (accumulate ``-(-x*y)``).
    """
    acc = np.int64(0)
    p2 = p * p
    count = 0
    for i in range(xs.shape[0]):
        a = xs[i]
        if a == 0:
            continue
        neg = p - a
        v = ys[i]
        if flavor == GENERIC:
            acc = magic_reduce(acc + (p - neg) * v, p, m, sh)
        elif flavor == SIGNED:
            acc = acc - neg * v
            if acc < 0:
                acc += p2
        else:
            acc += a * v
            count += 1
            if count == dlimit:
                acc %= p
                count = 0
    return acc % p


@njit(cache=True)
def _eliminate(acc, start, ncols, piv, nup,
               up_ptr, up_cols, up_vals,
               nw_start, nw_end, nw_cols, nw_vals,
               primes, mags, shs, flavor, dlimit, mult):
    nl = acc.shape[1]
    count = 0
    lneg = np.empty(nl, dtype=np.int64)
    lp2 = np.empty(nl, dtype=np.int64)
    for k in range(start, ncols):
        pv = piv[k]
        if pv < 0:
            continue
        anynz = False
        for l in range(nl):
            a = acc[k, l]
            if flavor != GENERIC:
                a %= primes[l]
            mult[l] = a
            if a != 0:
                anynz = True
        if not anynz:
            for l in range(nl):
                acc[k, l] = 0
            continue
        if pv < nup:
            s = up_ptr[pv]
            e = up_ptr[pv + 1]
            cols = up_cols
            vals = up_vals
        else:
            s = nw_start[pv - nup]
            e = nw_end[pv - nup]
            cols = nw_cols
            vals = nw_vals
        if nl > 1:
            # lanes innermost: contiguous rows of acc and vals
            for l in range(nl):
                lneg[l] = primes[l] - mult[l]
                lp2[l] = primes[l] * primes[l]
            for j in range(s, e):
                c = cols[j]
                if flavor == GENERIC:
                    for l in range(nl):
                        acc[c, l] = magic_reduce(acc[c, l] + lneg[l] * vals[j, l],
                                                 primes[l], mags[l], shs[l])
                elif flavor == SIGNED:
                    for l in range(nl):
                        x = acc[c, l] - mult[l] * vals[j, l]
                        # branch-free: add p^2 when negative
                        acc[c, l] = x + ((x >> 63) & lp2[l])
                else:
                    for l in range(nl):
                        acc[c, l] += lneg[l] * vals[j, l]
            for l in range(nl):
                acc[k, l] = 0
            if flavor == DELAYED:
                count += 1
                if count == dlimit:
                    for c in range(k + 1, ncols):
                        for l in range(nl):
                            acc[c, l] %= primes[l]
                    count = 0
            continue
        for l in range(nl):
            a = mult[l]
            if a == 0:
                continue
            p = primes[l]
            if flavor == GENERIC:
                neg = p - a
                m = mags[l]
                sh = shs[l]
                for j in range(s, e):
                    c = cols[j]
                    acc[c, l] = magic_reduce(acc[c, l] + neg * vals[j, l], p, m, sh)
            elif flavor == SIGNED:
                p2 = p * p
                for j in range(s, e):
                    c = cols[j]
                    x = acc[c, l] - a * vals[j, l]
                    if x < 0:
                        x += p2
                    acc[c, l] = x
            else:
                neg = p - a
                for j in range(s, e):
                    c = cols[j]
                    acc[c, l] += neg * vals[j, l]
        for l in range(nl):
            acc[k, l] = 0
        if flavor == DELAYED:
            count += 1
            if count == dlimit:
                for c in range(k + 1, ncols):
                    for l in range(nl):
                        acc[c, l] %= primes[l]
                count = 0


@njit(cache=True)
def _gather(acc, start, ncols, primes, flavor, buf_cols, buf_vals):
    """Move the accumulator's nonzero columns >= start into buffers, zeroing it."""
    nl = acc.shape[1]
    n = 0
    for c in range(start, ncols):
        nz = False
        for l in range(nl):
            x = acc[c, l]
            if flavor != GENERIC:
                x %= primes[l]
            buf_vals[n, l] = x
            if x != 0:
                nz = True
            acc[c, l] = 0
        if nz:
            buf_cols[n] = c
            n += 1
    return n


@njit(cache=True)
def reduce_rows(ncols, primes, mags, shs, flavor, dlimit,
                up_ptr, up_cols, up_vals, pivot_of_col,
                lo_ptr, lo_cols, lo_vals, order,
                new_pivots, skip_lead, interreduce,
                probabilistic, seed, block):
    """Reduce lower rows against the upper pivots.

    With ``new_pivots`` every nonzero reduced row becomes a monic pivot used
    for the following rows, and the pivots are finally inter-reduced when
    ``interreduce``.  Without it each row is only reduced (normal form), and
    with ``skip_lead`` its first entry is kept (tail reduction).

    Returns (ptr, cols, vals, src, lane_bad, nzero): output rows in CSR form,
    the lower row each came from (-1 for random combinations), a per-lane
    flag raised when a lane had to take a pivot whose lead it lacks, and the
    number of rows that reduced to zero.
    """
    nl = primes.shape[0]
    nup = up_ptr.shape[0] - 1
    nlow = order.shape[0]
    acc = np.zeros((ncols, nl), dtype=np.int64)
    mult = np.zeros(nl, dtype=np.int64)
    piv = pivot_of_col.copy()
    lane_bad = np.zeros(nl, dtype=np.bool_)

    cap = 1024
    for i in range(nlow):
        r = order[i]
        cap += lo_ptr[r + 1] - lo_ptr[r]
    nw_cols = np.empty(cap, dtype=np.int64)
    nw_vals = np.empty((cap, nl), dtype=np.int64)
    nw_start = np.empty(nlow + 1, dtype=np.int64)
    nw_end = np.empty(nlow + 1, dtype=np.int64)
    nw_lead = np.empty(nlow + 1, dtype=np.int64)
    nw_src = np.empty(nlow + 1, dtype=np.int64)
    used = 0
    npiv = 0
    nzero = 0
    buf_cols = np.empty(ncols, dtype=np.int64)
    buf_vals = np.empty((ncols, nl), dtype=np.int64)

    # plain reduction: one output row per lower row
    if not new_pivots:
        out_ptr = np.zeros(nlow + 1, dtype=np.int64)
        chunks_c = np.empty(cap, dtype=np.int64)
        chunks_v = np.empty((cap, nl), dtype=np.int64)
        pos = 0
        for i in range(nlow):
            r = order[i]
            s = lo_ptr[r]
            e = lo_ptr[r + 1]
            if s == e:
                out_ptr[i + 1] = pos
                nzero += 1
                continue
            first = ncols
            for j in range(s, e):
                c = lo_cols[j]
                for l in range(nl):
                    acc[c, l] = lo_vals[j, l]
                if c < first:
                    first = c
            start = first + 1 if skip_lead else first
            _eliminate(acc, start, ncols, piv, nup, up_ptr, up_cols, up_vals,
                       nw_start, nw_end, nw_cols, nw_vals,
                       primes, mags, shs, flavor, dlimit, mult)
            n = _gather(acc, first, ncols, primes, flavor, buf_cols, buf_vals)
            if n == 0:
                nzero += 1
            if pos + n > chunks_c.shape[0]:
                newcap = 2 * (pos + n)
                c2 = np.empty(newcap, dtype=np.int64)
                v2 = np.empty((newcap, nl), dtype=np.int64)
                c2[:pos] = chunks_c[:pos]
                v2[:pos] = chunks_v[:pos]
                chunks_c = c2
                chunks_v = v2
            chunks_c[pos:pos + n] = buf_cols[:n]
            chunks_v[pos:pos + n] = buf_vals[:n]
            pos += n
            out_ptr[i + 1] = pos
        src = order.copy()
        return out_ptr, chunks_c[:pos].copy(), chunks_v[:pos].copy(), src, lane_bad, nzero

    if probabilistic:
        np.random.seed(seed)
    nrounds = nlow
    if probabilistic:
        nrounds = (nlow + block - 1) // block
    for b in range(nrounds):
        if probabilistic:
            b0 = b * block
            b1 = min(nlow, b0 + block)
            tries = b1 - b0
        else:
            b0 = b
            b1 = b + 1
            tries = 1
        for t in range(tries):
            first = ncols
            if probabilistic:
                for i in range(b0, b1):
                    r = order[i]
                    coef = np.random.randint(1, 1 << 30)
                    for j in range(lo_ptr[r], lo_ptr[r + 1]):
                        c = lo_cols[j]
                        if c < first:
                            first = c
                        for l in range(nl):
                            p = primes[l]
                            acc[c, l] = (acc[c, l] + (coef % p) * lo_vals[j, l]) % p
            else:
                r = order[b0]
                for j in range(lo_ptr[r], lo_ptr[r + 1]):
                    c = lo_cols[j]
                    if c < first:
                        first = c
                    for l in range(nl):
                        acc[c, l] = lo_vals[j, l]
            if first == ncols:
                nzero += 1
                if probabilistic:
                    nzero += (b1 - b0) - t - 1
                    break
                continue
            _eliminate(acc, first, ncols, piv, nup, up_ptr, up_cols, up_vals,
                       nw_start, nw_end, nw_cols, nw_vals,
                       primes, mags, shs, flavor, dlimit, mult)
            n = _gather(acc, first, ncols, primes, flavor, buf_cols, buf_vals)
            if n == 0:
                nzero += 1
                if probabilistic:
                    # the block's span is exhausted (with high probability)
                    nzero += (b1 - b0) - t - 1
                    break
                continue
            lead = buf_cols[0]
            for l in range(nl):
                a = buf_vals[0, l]
                if a == 0:
                    lane_bad[l] = True
                    continue
                if a != 1:
                    p = primes[l]
                    inv = inv_mod64(a, p)
                    for j in range(n):
                        buf_vals[j, l] = buf_vals[j, l] * inv % p
            if used + n > nw_cols.shape[0]:
                newcap = 2 * (used + n)
                c2 = np.empty(newcap, dtype=np.int64)
                v2 = np.empty((newcap, nl), dtype=np.int64)
                c2[:used] = nw_cols[:used]
                v2[:used] = nw_vals[:used]
                nw_cols = c2
                nw_vals = v2
            nw_cols[used:used + n] = buf_cols[:n]
            nw_vals[used:used + n] = buf_vals[:n]
            nw_start[npiv] = used
            nw_end[npiv] = used + n
            nw_lead[npiv] = lead
            nw_src[npiv] = -1 if probabilistic else order[b0]
            used += n
            piv[lead] = nup + npiv
            npiv += 1

    # process the new pivots from the rightmost lead to the leftmost
    perm = np.argsort(nw_lead[:npiv])[::-1]
    if interreduce:
        for q in range(npiv):
            i = perm[q]
            s = nw_start[i]
            e = nw_end[i]
            if e - s <= 1:
                continue
            lead = nw_lead[i]
            for j in range(s, e):
                c = nw_cols[j]
                for l in range(nl):
                    acc[c, l] = nw_vals[j, l]
            _eliminate(acc, lead + 1, ncols, piv, nup, up_ptr, up_cols, up_vals,
                       nw_start, nw_end, nw_cols, nw_vals,
                       primes, mags, shs, flavor, dlimit, mult)
            n = _gather(acc, lead, ncols, primes, flavor, buf_cols, buf_vals)
            if used + n > nw_cols.shape[0]:
                newcap = 2 * (used + n)
                c2 = np.empty(newcap, dtype=np.int64)
                v2 = np.empty((newcap, nl), dtype=np.int64)
                c2[:used] = nw_cols[:used]
                v2[:used] = nw_vals[:used]
                nw_cols = c2
                nw_vals = v2
            nw_cols[used:used + n] = buf_cols[:n]
            nw_vals[used:used + n] = buf_vals[:n]
            nw_start[i] = used
            nw_end[i] = used + n
            used += n

    # emit ordered by lead column (descending monomials)
    out_ptr = np.zeros(npiv + 1, dtype=np.int64)
    total = 0
    for q in range(npiv):
        i = perm[npiv - 1 - q]
        total += nw_end[i] - nw_start[i]
        out_ptr[q + 1] = total
    out_cols = np.empty(total, dtype=np.int64)
    out_vals = np.empty((total, nl), dtype=np.int64)
    src = np.empty(npiv, dtype=np.int64)
    for q in range(npiv):
        i = perm[npiv - 1 - q]
        s = nw_start[i]
        e = nw_end[i]
        out_cols[out_ptr[q]:out_ptr[q + 1]] = nw_cols[s:e]
        out_vals[out_ptr[q]:out_ptr[q + 1]] = nw_vals[s:e]
        src[q] = nw_src[i]
    return out_ptr, out_cols, out_vals, src, lane_bad, nzero
