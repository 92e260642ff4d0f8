"""Shift selection: the sup bound, the 2x2 bound, twisted shifts and the case dispatcher."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .core import EPS, Segment, ZArray, eig2
from .kernel import TransformOutcome

ALPHA_MIN, ALPHA_MAX = 0.25, 0.96
PHI_MAX = 0.75


class Case(enum.Enum):
    CASE1_ZERO = "case1_zero"
    CASE23_TRAILING = "case23_trailing"
    CASE45_TWISTED = "case45_twisted"
    CASE6_ALPHA_SUP = "case6_alpha_sup"
    POST_DEFLATION = "post_deflation"
    RETRY_AFTER_FAILURE = "retry_after_failure"


@dataclass
class ShiftDecision:
    s: float
    case_tag: Case


@dataclass
class ShiftPolicy:
    sup_updates: bool = True
    p_twist: int = 20
    kahan_2x2: bool = True
    force_twisted: bool = False


@dataclass
class ShiftHistory:
    """What happened in the previous round of the driver loop."""
    deflated: int = 0  # values deflated; -1 marks a d-deflation
    failed: bool = False
    last_shift: float = 0.0
    prev_success_shift: float = 0.0


@dataclass
class TwistedWork:
    qring: list
    ering: list
    t: list
    gamma: float = math.nan
    phi: float = math.nan
    bound: float = math.nan


def update_sup(seg: Segment, s: float, outcome: TransformOutcome, enabled: bool = True) -> None:
    if outcome.ok:
        seg.sup = min(outcome.dmin, seg.sup - s) if enabled else outcome.dmin
    elif enabled:
        seg.sup = min(s, seg.sup)


def two_by_two_bound(qhat_km1: float, ehat_km1: float, d_k: float) -> float:
    """Smallest eigenvalue of the 2x2 block around d_min; an upper bound on sigma_min^2."""
    return eig2(qhat_km1, ehat_km1, d_k)[1]


def reverse_dstqds(q, e, s: float, stop: int = 0):
    """Bottom-up stationary qd transform of (q, e) with shift s.

    Computes qring for rows len(q)-1 down to ``stop`` (0-based).  Returns
    ``(qring, ering, t, valid)``; entries not computed are NaN and ``valid``
    is False as soon as some computed qring is not positive.
    """
    n = len(q)
    qr = [math.nan] * n
    er = [math.nan] * max(n - 1, 0)
    t = [math.nan] * n
    t[n - 1] = -s
    for i in range(n - 2, max(stop - 1, 0) - 1, -1):
        qr[i + 1] = q[i + 1] + t[i + 1]
        if not qr[i + 1] > 0 or not math.isfinite(qr[i + 1]):
            return qr, er, t, False
        tmp = e[i] / qr[i + 1]
        er[i] = q[i + 1] * tmp
        t[i] = t[i + 1] * tmp - s
    if stop == 0:
        qr[0] = q[0] + t[0]
        if not qr[0] > 0:
            return qr, er, t, False
    return qr, er, t, True


def twisted_work(Z: ZArray, seg: Segment, k: int, dk: float, s_prev: float,
                 max_terms: int = 80) -> TwistedWork | None:
    """Twisted factorization at row k of the transform that produced the current bank.

    Rows above k come from the current bank (outputs of the last sweep), rows
    below k from a reverse dstqds of the previous bank with the same shift.
    """
    z, new, old, i0, n0 = Z.z, seg.pp, 1 - seg.pp, seg.i0, seg.n0
    if k < n0:
        qo = z[4 * k + old : 4 * n0 + old + 1 : 4]
        eo = z[4 * k + 2 + old : 4 * n0 + 2 + old : 4]
        qr, er, t, ok = reverse_dstqds(qo, eo, s_prev, stop=1)
        if not ok:
            return None
        gamma = dk + t[1] * eo[0] / qr[1]
    else:
        qr, er, t = [], [], []
        gamma = dk
    work = TwistedWork(qr, er, t, gamma)
    if not gamma > 0 or not math.isfinite(gamma):
        return None
    phi2 = 0.0
    w = 1.0
    for j in range(k - 1, max(i0, k - max_terms) - 1, -1):
        w *= z[4 * j + 2 + new] / z[4 * j + new]
        phi2 += w
        if w < EPS:
            break
    w = 1.0
    for r in range(1, min(n0 - k, max_terms) + 1):
        w *= er[r - 1] / qr[r]
        phi2 += w
        if w < EPS:
            break
    work.phi = math.sqrt(phi2)
    work.bound = gamma * (1.0 - work.phi) / (1.0 + phi2)
    return work


def twisted_shift(Z: ZArray, seg: Segment, k: int, dk: float, s_prev: float,
                  max_terms: int = 80) -> ShiftDecision | None:
    work = twisted_work(Z, seg, k, dk, s_prev, max_terms)
    if work is None or not work.phi < PHI_MAX:
        return None
    return ShiftDecision(max(work.bound, 0.0), Case.CASE45_TWISTED)


def _q(Z, seg, j):
    return Z.z[4 * j + seg.pp]


def _e(Z, seg, j):
    return Z.z[4 * j + 2 + seg.pp]


def choose_shift(Z: ZArray, seg: Segment, history: ShiftHistory,
                 policy: ShiftPolicy = ShiftPolicy()) -> ShiftDecision:
    dec = _dispatch(Z, seg, history, policy)
    dec.s = min(max(dec.s, 0.0), seg.sup)
    if not math.isfinite(dec.s):
        dec.s = 0.0
    return dec


def _dispatch(Z, seg, history, policy):
    alpha, sup, n0, i0 = seg.alpha, seg.sup, seg.n0, seg.i0
    if seg.fresh:
        return ShiftDecision(0.0, Case.CASE1_ZERO)
    if sup <= EPS * seg.S:
        return ShiftDecision(0.0, Case.CASE1_ZERO)
    if history.failed:
        if policy.sup_updates:
            return ShiftDecision(alpha * sup, Case.RETRY_AFTER_FAILURE)
        return ShiftDecision(0.25 * history.last_shift, Case.RETRY_AFTER_FAILURE)
    if history.deflated:
        return _post_deflation(Z, seg, history)
    k = seg.dmink
    if k >= n0 - 1 or policy.force_twisted:
        if policy.force_twisted:
            dec = twisted_shift(Z, seg, k, seg.dmin, history.prev_success_shift)
            if dec is not None:
                return dec
        b2 = two_by_two_bound(_q(Z, seg, n0 - 1), _e(Z, seg, n0 - 1), _q(Z, seg, n0))
        g = math.sqrt(_e(Z, seg, n0 - 2) * _q(Z, seg, n0)) if n0 - 2 >= i0 else 0.0
        return ShiftDecision(max(0.0, min(alpha * sup, b2 - g)), Case.CASE23_TRAILING)
    if k > n0 - policy.p_twist:
        dec = twisted_shift(Z, seg, k, seg.dmin, history.prev_success_shift)
        if dec is not None:
            return dec
    if policy.kahan_2x2 and k > i0:
        seg.sup = min(seg.sup, two_by_two_bound(_q(Z, seg, k - 1), _e(Z, seg, k - 1), seg.dmin))
    return ShiftDecision(alpha * seg.sup, Case.CASE6_ALPHA_SUP)


def _post_deflation(Z, seg, history):
    alpha, sup, n0, i0 = seg.alpha, seg.sup, seg.n0, seg.i0
    if history.deflated < 0 or n0 <= i0:
        return ShiftDecision(alpha * sup, Case.POST_DEFLATION)
    est = min(seg.dn1, seg.dn2) if history.deflated == 1 else seg.dn2
    if not math.isfinite(est):
        return ShiftDecision(alpha * sup, Case.POST_DEFLATION)
    safety = 2.0 * math.sqrt(_e(Z, seg, n0 - 1) * _q(Z, seg, n0))
    return ShiftDecision(min(alpha * sup, max(0.0, est - safety)), Case.POST_DEFLATION)


def adapt_alpha(seg: Segment, outcome: TransformOutcome) -> None:
    if outcome.ok:
        seg.fail_streak = 0
        seg.alpha = min(ALPHA_MAX, seg.alpha * 1.05)
    else:
        seg.fail_streak += 1
        if seg.fail_streak >= 3:
            seg.alpha = max(ALPHA_MIN, seg.alpha / 2)
            seg.fail_streak = 0
