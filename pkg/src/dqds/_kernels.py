"""Compiled inner loops over the ping-pong array (see core for the layout)."""
import numpy as np
from numba import njit

SUCCESS, EARLY, LATE, DEFLATED = 0, 1, 2, 3


@njit(cache=True, nogil=True)
def dqds_pass(z, i0, n0, pp, s):
    """One dqds sweep of rows i0..n0 from bank pp into bank 1-pp.

    Returns (kind, dmin, dmink, dn, dn1, dn2, fail_index).
    """
    dmin = np.inf
    dmink = i0
    dn = dn1 = dn2 = np.nan
    d = z[4 * i0 + pp] - s
    for k in range(i0, n0):
        j = 4 * k
        qhat = d + z[j + 2 + pp]
        z[j + 1 - pp] = qhat
        t = z[j + 4 + pp] / qhat
        if d < 0.0:
            return EARLY, dmin, dmink, d, dn, dn1, k
        if d < dmin:
            dmink = k
            dmin = d
        z[j + 3 - pp] = z[j + 2 + pp] * t
        dn2 = dn1
        dn1 = d
        d = d * t - s
    dn2, dn1, dn = dn2, dn1, d
    z[4 * n0 + 1 - pp] = d
    # division by zero / overflow is not guarded inside the loop
    for k in range(i0, n0 + 1):
        j = 4 * k
        if not np.isfinite(z[j + 1 - pp]) or (k < n0 and not np.isfinite(z[j + 3 - pp])):
            return EARLY, dmin, dmink, dn, dn1, dn2, k
    if d < 0.0:
        return LATE, dmin, dmink, dn, dn1, dn2, n0
    if d < dmin:
        dmink = n0
        dmin = d
    return SUCCESS, dmin, dmink, dn, dn1, dn2, -1


@njit(cache=True, nogil=True)
def dqd_deflating_pass(z, i0, n0, pp, thresh):
    """Zero-shift sweep that zeroes the first d_k <= thresh.

    On a hit at row k the remaining rows shift position (qhat_j = e_j,
    ehat_j = q_{j+1} for j >= k, qhat_n0 = 0).  Returns the same tuple as
    ``dqds_pass`` with kind DEFLATED and fail_index = k, or SUCCESS otherwise.
    """
    dmin = np.inf
    dmink = i0
    dn = dn1 = dn2 = np.nan
    d = z[4 * i0 + pp]
    hit = -1
    for k in range(i0, n0):
        if d <= thresh:
            hit = k
            break
        j = 4 * k
        qhat = d + z[j + 2 + pp]
        z[j + 1 - pp] = qhat
        t = z[j + 4 + pp] / qhat
        if d < dmin:
            dmink = k
            dmin = d
        z[j + 3 - pp] = z[j + 2 + pp] * t
        dn2 = dn1
        dn1 = d
        d = d * t
    if hit < 0:
        if d <= thresh:
            hit = n0
        else:
            dn2, dn1, dn = dn2, dn1, d
            z[4 * n0 + 1 - pp] = d
            if d < dmin:
                dmink = n0
                dmin = d
            return SUCCESS, dmin, dmink, dn, dn1, dn2, -1
    for k in range(hit, n0):
        j = 4 * k
        z[j + 1 - pp] = z[j + 2 + pp]
        z[j + 3 - pp] = z[j + 4 + pp]
    z[4 * n0 + 1 - pp] = 0.0
    return DEFLATED, 0.0, hit, 0.0, dn1, dn2, hit


@njit(cache=True, nogil=True)
def chase_bulge_pass(z, i0, n0, pp, thresh, budget):
    """Chase the bulge x = e_{n0-1} up the last column of bank pp.

    Row n0 is assumed to carry q = 0.  Returns the number of rotations, or -1
    when the budget ran out (bank left partially modified).
    """
    x = z[4 * (n0 - 1) + 2 + pp]
    if x <= thresh:
        return 0
    rot = 0
    k = n0 - 1
    while k > i0:
        j = 4 * k
        t1 = z[j + pp]
        qk = t1 + x
        z[j + pp] = qk
        t2 = 1.0 / qk
        ekm1 = z[j - 2 + pp]
        x = x * ekm1 * t2
        z[j - 2 + pp] = ekm1 * t1 * t2
        rot += 1
        k -= 1
        if x <= thresh:
            return rot
        if rot >= budget:
            return -1
    z[4 * i0 + pp] += x
    return rot + 1


@njit(cache=True, nogil=True)
def find_split(z, i0, n0, pp, tol, S, refined):
    """Largest k in [i0, n0-2] whose coupling e_k is negligible, or -1."""
    tolS2 = (tol * S) * (tol * S)
    for k in range(n0 - 2, i0 - 1, -1):
        j = 4 * k
        ek = z[j + 2 + pp]
        if ek == 0.0:
            return k
        if refined:
            qk = z[j + pp]
            if ek < tol * max(S, qk) and ek * z[j + 4 + pp] < tolS2:
                return k
        elif ek < tol * tol * S:
            return k
    return -1


@njit(cache=True, nogil=True)
def unsquared_dmin(a, b, n):
    """min_k d_k of a zero-shift sweep on the bidiagonal entries themselves; no writes."""
    d = a[0]
    dmin = d
    for k in range(n - 1):
        d = d * (a[k + 1] / np.hypot(d, b[k]))
        dmin = min(dmin, d)
    return dmin


@njit(cache=True, nogil=True)
def oqd_pass(a, b, n):
    """Zero-shift sweep in square-root form, in place: Bhat^T Bhat = B B^T.

    Never squares an entry, so it is immune to under/overflow of q and e.
    """
    d = a[0]
    for k in range(n - 1):
        r = np.hypot(d, b[k])
        a[k] = r
        b[k] = b[k] * (a[k + 1] / r)
        d = d * (a[k + 1] / r)
    a[n - 1] = d
