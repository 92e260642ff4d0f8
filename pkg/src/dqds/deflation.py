"""Trailing deflation, interior splitting and d-deflation with bulge chasing."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from . import _kernels
from .core import EPS, Segment, ZArray, eig2
from .kernel import Kind, TransformOutcome

C_DEFLATE = 10.0


class EventKind(enum.Enum):
    TRAILING1 = "trailing1"
    TRAILING2 = "trailing2"
    SPLIT = "split"
    DDEFLATE = "d_deflate"


@dataclass
class DeflationEvent:
    kind: EventKind
    values: list = field(default_factory=list)  # extracted sigma^2 (accumulated shift included)
    split_at: int = -1
    rotations_used: int = 0
    children: tuple = ()


def _negligible(e, q_above, q_below, S, tol, refined):
    if e == 0.0 or e < tol * tol * S:
        return True
    return refined and e < tol * max(S, q_above) and e * q_below < (tol * S) ** 2


def test_trailing(Z: ZArray, seg: Segment, c: float = C_DEFLATE, refined: bool = True):
    """Deflate one or two values from the bottom of ``seg`` if the couplings allow.

    Shrinks ``seg`` on success.  A 1x1 segment always deflates.
    """
    z, pp, n0 = Z.z, seg.pp, seg.n0
    if seg.n0 == seg.i0:
        seg.n0 -= 1
        return DeflationEvent(EventKind.TRAILING1, [seg.shifted(z[4 * n0 + pp])])
    tol = c * EPS
    S = seg.S
    qn = z[4 * n0 + pp]
    qn1 = z[4 * (n0 - 1) + pp]
    en1 = z[4 * (n0 - 1) + 2 + pp]
    if _negligible(en1, qn1, qn, S, tol, refined):
        z[4 * (n0 - 1) + 2 + pp] = 0.0
        seg.n0 -= 1
        return DeflationEvent(EventKind.TRAILING1, [seg.shifted(qn)])
    if len(seg) >= 3:
        qn2 = z[4 * (n0 - 2) + pp]
        en2 = z[4 * (n0 - 2) + 2 + pp]
        if _negligible(en2, qn2, qn1, S, tol, refined):
            z[4 * (n0 - 2) + 2 + pp] = 0.0
            seg.n0 -= 2
            return DeflationEvent(EventKind.TRAILING2, _deflate_pair(seg, qn1, en1, qn))
    return None


def _deflate_pair(seg, qa, ea, qb):
    big, small = eig2(qa, ea, qb)
    return [seg.shifted(big), seg.shifted(small)]


def deflate_2x2(Z: ZArray, seg: Segment) -> DeflationEvent:
    """Finish a two-row segment in closed form."""
    z, pp, i0 = Z.z, seg.pp, seg.i0
    vals = _deflate_pair(seg, z[4 * i0 + pp], z[4 * i0 + 2 + pp], z[4 * i0 + 4 + pp])
    seg.n0 = seg.i0 - 1
    return DeflationEvent(EventKind.TRAILING2, vals)


def test_split(Z: ZArray, seg: Segment, c: float = C_DEFLATE, refined: bool = True):
    """Split at the lowest interior negligible coupling (the bottom one is test_trailing's)."""
    if len(seg) < 3:
        return None
    k = _kernels.find_split(Z.z, seg.i0, seg.n0, seg.pp, c * EPS, seg.S, refined)
    if k < 0:
        return None
    Z.z[4 * k + 2 + seg.pp] = 0.0
    top = _child(seg, seg.i0, k)
    bottom = _child(seg, k + 1, seg.n0)
    return DeflationEvent(EventKind.SPLIT, split_at=k, children=(top, bottom))


def _child(seg: Segment, i0: int, n0: int) -> Segment:
    return Segment(i0, n0, pp=seg.pp, S=seg.S, S_lo=seg.S_lo, sup=seg.sup, alpha=seg.alpha)


def bulge_budget(m: int) -> int:
    return 10 * max(1, math.ceil(math.log2(max(m, 2))))


def chase_bulge(Z: ZArray, seg: Segment, budget: int | None = None) -> int:
    """Chase x = e_{n0-1} up the last column, assuming q_{n0} = 0.

    Returns rotations used, or -1 if ``budget`` ran out first.
    """
    budget = bulge_budget(len(seg)) if budget is None else budget
    return int(_kernels.chase_bulge_pass(Z.z, seg.i0, seg.n0, seg.pp, EPS * seg.S, budget))


def d_deflate(Z: ZArray, seg: Segment, outcome: TransformOutcome, budget: int | None = None):
    """Zero a negligible d_k of a fresh zero-shift pass and deflate sigma^2 = S.

    Returns ``(event, pass_outcome)``.  ``pass_outcome`` is None when nothing
    was applied: the criterion failed, or the bulge chase exceeded its budget
    (the pass is then discarded and the array is unchanged).  When the pass
    finds no negligible d the event is None and the pass stands as an
    ordinary dqd sweep.
    """
    thresh = EPS * seg.S
    if seg.S <= 0.0 or not outcome.dmin <= thresh:
        return None, None
    kind, dmin, dmink, dn, dn1, dn2, hit = _kernels.dqd_deflating_pass(
        Z.z, seg.i0, seg.n0, seg.pp, thresh)
    if kind == _kernels.SUCCESS:
        seg.pp = 1 - seg.pp
        Z.pingpong = seg.pp
        return None, TransformOutcome(Kind.SUCCESS, dmin, dmink, dn, dn1, dn2, -1, 0.0)
    trial = Segment(seg.i0, seg.n0, pp=1 - seg.pp, S=seg.S, S_lo=seg.S_lo)
    rot = chase_bulge(Z, trial, budget) if len(seg) > 1 else 0
    if rot < 0:
        return None, None
    seg.pp = trial.pp
    Z.pingpong = seg.pp
    if seg.n0 > seg.i0:
        Z.z[4 * (seg.n0 - 1) + 2 + seg.pp] = 0.0
    seg.n0 -= 1
    ev = DeflationEvent(EventKind.DDEFLATE, [seg.shifted(0.0)], rotations_used=rot)
    return ev, TransformOutcome(Kind.SUCCESS, 0.0, hit, 0.0, dn1, dn2, hit, 0.0)
