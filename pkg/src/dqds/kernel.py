"""The dqd/dqds transform with d_min tracking and failure classification."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from . import _kernels
from .core import Segment, ZArray


class Kind(enum.Enum):
    SUCCESS = "success"
    EARLY_FAILURE = "early_failure"
    LATE_FAILURE = "late_failure"


_KINDS = {
    _kernels.SUCCESS: Kind.SUCCESS,
    _kernels.EARLY: Kind.EARLY_FAILURE,
    _kernels.LATE: Kind.LATE_FAILURE,
}


@dataclass
class TransformOutcome:
    kind: Kind
    dmin: float
    dmink: int
    dn: float
    dn1: float
    dn2: float
    fail_index: int = -1
    shift: float = 0.0

    @property
    def ok(self) -> bool:
        return self.kind is Kind.SUCCESS


def _run(Z: ZArray, seg: Segment, s: float) -> TransformOutcome:
    kind, dmin, dmink, dn, dn1, dn2, fail = _kernels.dqds_pass(Z.z, seg.i0, seg.n0, seg.pp, float(s))
    out = TransformOutcome(_KINDS[kind], dmin, dmink, dn, dn1, dn2, fail, float(s))
    if out.ok:
        seg.pp = 1 - seg.pp
        Z.pingpong = seg.pp
    return out


def dqd_sweep(Z: ZArray, seg: Segment) -> TransformOutcome:
    """Zero-shift sweep; always succeeds on finite positive data."""
    return _run(Z, seg, 0.0)


def dqds_sweep(Z: ZArray, seg: Segment, s: float) -> TransformOutcome:
    """Shifted sweep.  The bank only switches on success; failed transforms are discarded.

    Does not touch ``seg.S``; the caller accumulates the shift.
    """
    return _run(Z, seg, s)


def retry_late_failure(Z: ZArray, seg: Segment, s: float, dn: float):
    """Re-sweep with s + d_n after a late failure (falls back to s = 0)."""
    s_new = s + dn
    if s_new > 0.0:
        out = _run(Z, seg, s_new)
        if out.ok:
            return out, s_new
    return _run(Z, seg, 0.0), 0.0
