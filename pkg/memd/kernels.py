"""
Compiled inner loops of the envelope stage.

Every envelope of one sifting pass is evaluated here, sample by sample, under
the horizon rule documented in :mod:`memd.sifting`. Records of all envelopes
arrive concatenated: ``bounds[e]:bounds[e + 1]`` selects envelope ``e`` and
``offsets[e]`` counts its records that the caller no longer holds. A sample's
value depends only on the records inside its window, so batch and streaming
callers that pass the same window contents get bit-identical results.

The kernels are compiled without fastmath; the summation order over envelopes
is part of the output.
"""

import numba
import numpy as np

WIDE_BITS = 24
WIDE_HALF = 1 << (WIDE_BITS - 1)
WIDE_MASK = (1 << WIDE_BITS) - 1
WIDE_UNIT = 1 << WIDE_BITS

# ratio(): reciprocal table index is the denominator in Q16.8
TABLE_SHIFT = 8
TABLE_MAX = 256 << TABLE_SHIFT
RECIP_SHIFT = 30 - WIDE_BITS


# ---------------------------------------------------------------------------
# Integer helpers (round-half-even throughout)
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _shift_round(v, shift):
    q = v >> shift
    r = v - (q << shift)
    half = np.int64(1) << (shift - 1)
    if r > half or (r == half and (q & 1) == 1):
        q += 1
    return q


@numba.njit(cache=True, nogil=True)
def _div_round(n, d):
    q = n // d
    twice = 2 * (n - q * d)
    if twice > d or (twice == d and (q & 1) == 1):
        q += 1
    return q


@numba.njit(cache=True, nogil=True)
def _mul_wide(a, b):
    """round(a * b / 2^24) without forming the full product; |b| < 2^38."""
    hi = a >> WIDE_BITS
    lo = a & WIDE_MASK
    p = lo * b
    q = hi * b + (p >> WIDE_BITS)
    r = p & WIDE_MASK
    if r > WIDE_HALF or (r == WIDE_HALF and (q & 1) == 1):
        q += 1
    return q


@numba.njit(cache=True, nogil=True)
def _div_wide(n, d):
    """round(n * 2^24 / d) for d > 0 without overflowing the shifted numerator."""
    q = n // d
    r = n - q * d
    return (q << WIDE_BITS) + _div_round(r << WIDE_BITS, d)


@numba.njit(cache=True, nogil=True)
def _ratio(n, d, recip, misses):
    den = d << TABLE_SHIFT
    if den > TABLE_MAX:
        misses[0] += 1
        return _div_round(n << WIDE_BITS, d)
    return _shift_round(n * recip[den], RECIP_SHIFT)


# ---------------------------------------------------------------------------
# Window solves: natural spline over the window knots, normalised by the
# widest gap. Z holds M * hn^2 / 6; the segment term is scaled by (h_p/hn)^2.
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _solve_real(xs, ys, w, p, zl, zr, r, q, cp, piv, dp, z):
    hn = 1
    for i in range(w - 1):
        gap = xs[i + 1] - xs[i]
        if gap > hn:
            hn = gap
    for i in range(w - 1):
        r[i] = (xs[i + 1] - xs[i]) / hn
    m = w - 2
    if m <= 0:
        zl[:] = 0.0
        zr[:] = 0.0
        return r[p] * r[p]
    for k in range(m):
        diag = 2.0 * (r[k] + r[k + 1])
        if k > 0:
            diag -= r[k] * cp[k - 1]
        piv[k] = diag
        cp[k] = r[k + 1] / diag
    for c in range(ys.shape[0]):
        for i in range(w - 1):
            q[i] = (ys[c, i + 1] - ys[c, i]) / r[i]
        for k in range(m):
            num = q[k + 1] - q[k]
            if k > 0:
                num -= r[k] * dp[k - 1]
            dp[k] = num / piv[k]
        z[0] = 0.0
        z[w - 1] = 0.0
        z[m] = dp[m - 1]
        for k in range(m - 2, -1, -1):
            z[k + 1] = dp[k] - cp[k] * z[k + 2]
        zl[c] = z[p]
        zr[c] = z[p + 1]
    return r[p] * r[p]


@numba.njit(cache=True, nogil=True)
def _solve_fixed(xs, ys, w, p, zl, zr, r, inv, q, cp, piv, dp, z, recip, misses):
    hn = np.int64(1)
    for i in range(w - 1):
        gap = xs[i + 1] - xs[i]
        if gap > hn:
            hn = gap
    for i in range(w - 1):
        gap = xs[i + 1] - xs[i]
        r[i] = _ratio(gap, hn, recip, misses)
        inv[i] = _ratio(hn, gap, recip, misses)
    rp2 = _mul_wide(r[p], r[p])
    m = w - 2
    if m <= 0:
        zl[:] = 0
        zr[:] = 0
        return rp2
    for k in range(m):
        diag = 2 * (r[k] + r[k + 1])
        if k > 0:
            diag -= _mul_wide(cp[k - 1], r[k])
        piv[k] = diag
        cp[k] = _div_round(r[k + 1] << WIDE_BITS, diag)
    for c in range(ys.shape[0]):
        for i in range(w - 1):
            q[i] = _mul_wide(ys[c, i + 1] - ys[c, i], inv[i])
        for k in range(m):
            num = q[k + 1] - q[k]
            if k > 0:
                num -= _mul_wide(dp[k - 1], r[k])
            dp[k] = _div_wide(num, piv[k])
        z[0] = 0
        z[w - 1] = 0
        z[m] = dp[m - 1]
        for k in range(m - 2, -1, -1):
            z[k + 1] = dp[k] - _mul_wide(z[k + 2], cp[k])
        zl[c] = z[p]
        zr[c] = z[p + 1]
    return rp2


# ---------------------------------------------------------------------------
# Knot list of one envelope at a given horizon
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _fill_window(xs, ys, a, e, v, idx, ords, offset, mirror_about):
    """
    Knot g of the list: 0 and 1 mirror records 1 and 0 about sample 0, then the
    v records, then records v-1 and v-2 mirrored about ``mirror_about``.
    """
    for k in range(e - a + 1):
        g = a + k
        if g == 0:
            rec = 1
            x = -idx[1 - offset]
        elif g == 1:
            rec = 0
            x = -idx[0 - offset]
        elif g < v + 2:
            rec = g - 2
            x = idx[rec - offset]
        elif g == v + 2:
            rec = v - 1
            x = 2 * mirror_about - idx[rec - offset]
        else:
            rec = v - 2
            x = 2 * mirror_about - idx[rec - offset]
        xs[k] = x
        for c in range(ys.shape[0]):
            ys[c, k] = ords[rec - offset, c]


@numba.njit(cache=True, nogil=True)
def _locate(t, vp, jp, idx, det, offset, end, kmax, support, linear):
    """Window bounds (a, e), knot count v and window kind for sample t."""
    horizon = t + kmax
    n = idx.shape[0]
    while vp < n and det[vp] <= horizon:
        vp += 1
    while jp < vp and idx[jp] <= t:
        jp += 1
    v = offset + vp
    j = offset + jp + 1
    if linear:
        a = j
        e = j + 1
    else:
        a = max(j - support, 0)
        e = min(j + 1 + support, v + 3)
    end_known = end >= 0 and end <= horizon
    if e < v + 2:
        kind = 0
    elif end_known:
        kind = 1
    else:
        kind = 2
    mirror_about = end - 1 if end_known else horizon
    return vp, jp, v, j, a, e, kind, mirror_about


# ---------------------------------------------------------------------------
# Envelope accumulation
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _envelope_real(total, t0, fallback, idx, det, ords, offset, end, kmax, support, linear):
    n_ch, n_t = total.shape
    width = 2 * support + 2
    xs = np.zeros(width, dtype=np.int64)
    ys = np.zeros((n_ch, width))
    zl = np.zeros(n_ch)
    zr = np.zeros(n_ch)
    r = np.zeros(width)
    q = np.zeros(width)
    cp = np.zeros(width)
    piv = np.zeros(width)
    dp = np.zeros(width)
    z = np.zeros(width)
    vp = 0
    jp = 0
    ck_j = -1
    ck_a = -1
    ck_e = -1
    ck_kind = -1
    ck_v = -1
    rp2 = 1.0
    for i in range(n_t):
        t = t0 + i
        vp, jp, v, j, a, e, kind, mirror_about = _locate(
            t, vp, jp, idx, det, offset, end, kmax, support, linear
        )
        if v == 0:
            for c in range(n_ch):
                total[c, i] += fallback[c, i]
            continue
        if v == 1:
            for c in range(n_ch):
                total[c, i] += ords[0, c]
            continue
        if kind == 2 or j != ck_j or a != ck_a or e != ck_e or kind != ck_kind or (kind != 0 and v != ck_v):
            _fill_window(xs, ys, a, e, v, idx, ords, offset, mirror_about)
            if not linear:
                rp2 = _solve_real(xs, ys, e - a + 1, j - a, zl, zr, r, q, cp, piv, dp, z)
            ck_j = j
            ck_a = a
            ck_e = e
            ck_kind = kind
            ck_v = v
        p = j - a
        x0 = xs[p]
        u = (t - x0) / (xs[p + 1] - x0)
        if linear:
            for c in range(n_ch):
                total[c, i] += ys[c, p] + (ys[c, p + 1] - ys[c, p]) * u
            continue
        wl = 1.0 - u
        pw = wl * wl * wl - wl
        pu = u * u * u - u
        for c in range(n_ch):
            y0 = ys[c, p]
            total[c, i] += y0 + (ys[c, p + 1] - y0) * u + rp2 * (zl[c] * pw + zr[c] * pu)


@numba.njit(cache=True, nogil=True)
def _envelope_fixed(total, t0, fallback, idx, det, ords, offset, end, kmax, support, linear, recip, misses):
    n_ch, n_t = total.shape
    width = 2 * support + 2
    xs = np.zeros(width, dtype=np.int64)
    ys = np.zeros((n_ch, width), dtype=np.int64)
    zl = np.zeros(n_ch, dtype=np.int64)
    zr = np.zeros(n_ch, dtype=np.int64)
    r = np.zeros(width, dtype=np.int64)
    inv = np.zeros(width, dtype=np.int64)
    q = np.zeros(width, dtype=np.int64)
    cp = np.zeros(width, dtype=np.int64)
    piv = np.zeros(width, dtype=np.int64)
    dp = np.zeros(width, dtype=np.int64)
    z = np.zeros(width, dtype=np.int64)
    vp = 0
    jp = 0
    ck_j = -1
    ck_a = -1
    ck_e = -1
    ck_kind = -1
    ck_v = -1
    rp2 = np.int64(WIDE_UNIT)
    for i in range(n_t):
        t = t0 + i
        vp, jp, v, j, a, e, kind, mirror_about = _locate(
            t, vp, jp, idx, det, offset, end, kmax, support, linear
        )
        if v == 0:
            for c in range(n_ch):
                total[c, i] += fallback[c, i]
            continue
        if v == 1:
            for c in range(n_ch):
                total[c, i] += ords[0, c]
            continue
        if kind == 2 or j != ck_j or a != ck_a or e != ck_e or kind != ck_kind or (kind != 0 and v != ck_v):
            _fill_window(xs, ys, a, e, v, idx, ords, offset, mirror_about)
            if not linear:
                rp2 = _solve_fixed(
                    xs, ys, e - a + 1, j - a, zl, zr, r, inv, q, cp, piv, dp, z, recip, misses
                )
            ck_j = j
            ck_a = a
            ck_e = e
            ck_kind = kind
            ck_v = v
        p = j - a
        x0 = xs[p]
        u = _ratio(t - x0, xs[p + 1] - x0, recip, misses)
        if linear:
            for c in range(n_ch):
                total[c, i] += ys[c, p] + _mul_wide(ys[c, p + 1] - ys[c, p], u)
            continue
        wl = WIDE_UNIT - u
        pw = _shift_round(_shift_round(wl * wl, WIDE_BITS) * wl, WIDE_BITS) - wl
        pu = _shift_round(_shift_round(u * u, WIDE_BITS) * u, WIDE_BITS) - u
        for c in range(n_ch):
            y0 = ys[c, p]
            cubic = _mul_wide(zl[c], pw) + _mul_wide(zr[c], pu)
            total[c, i] += y0 + _mul_wide(ys[c, p + 1] - y0, u) + _mul_wide(cubic, rp2)


@numba.njit(cache=True, nogil=True)
def envelope_total_real(total, t0, fallback, idx, det, ords, bounds, offsets, end, kmax, support, linear):
    """Add every envelope, in order, into ``total`` (channels x samples from t0)."""
    for e in range(offsets.shape[0]):
        lo = bounds[e]
        hi = bounds[e + 1]
        _envelope_real(
            total, t0, fallback, idx[lo:hi], det[lo:hi], ords[lo:hi],
            offsets[e], end, kmax, support, linear,
        )


@numba.njit(cache=True, nogil=True)
def envelope_total_fixed(total, t0, fallback, idx, det, ords, bounds, offsets, end, kmax, support, linear, recip):
    """Fixed-point counterpart of envelope_total_real; returns the reciprocal table misses."""
    misses = np.zeros(1, dtype=np.int64)
    for e in range(offsets.shape[0]):
        lo = bounds[e]
        hi = bounds[e + 1]
        _envelope_fixed(
            total, t0, fallback, idx[lo:hi], det[lo:hi], ords[lo:hi],
            offsets[e], end, kmax, support, linear, recip, misses,
        )
    return misses[0]
