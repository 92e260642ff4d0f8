"""Independent reference: bisection with Sturm counts on the Golub-Kahan embedding.

Shares nothing with the dqds code path except the input type.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import EPS, BidiagonalInput


@dataclass(frozen=True)
class GKTridiagonal:
    """Zero-diagonal symmetric tridiagonal of order 2n; off-diagonal (a1, b1, a2, ..., an)."""
    offdiag: np.ndarray

    @property
    def m(self) -> int:
        return self.offdiag.size + 1

    def norm_inf(self) -> float:
        off = np.abs(self.offdiag)
        rows = np.zeros(self.m)
        rows[:-1] += off
        rows[1:] += off
        return float(rows.max())

    def dense(self) -> np.ndarray:
        return np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def golub_kahan_embed(B: BidiagonalInput) -> GKTridiagonal:
    off = np.empty(2 * B.n - 1)
    off[0::2] = B.a
    off[1::2] = B.b
    return GKTridiagonal(off)


@njit(cache=True)
def _sturm_counts(off2, t, nrm, eps):
    out = np.empty(t.size, dtype=np.int64)
    for i in range(t.size):
        x = t[i]
        tiny = -eps * (abs(x) + nrm)
        d = -x
        if d == 0.0:
            d = tiny
        c = 1 if d < 0 else 0
        for b2 in off2:
            d = -x - b2 / d
            if d == 0.0:
                d = tiny
            if d < 0:
                c += 1
        out[i] = c
    return out


def sturm_count(T: GKTridiagonal, t):
    """Number of eigenvalues of T strictly below t (vectorized over t)."""
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    count = _sturm_counts(T.offdiag**2, np.atleast_1d(t).ravel(), T.norm_inf(), EPS)
    return int(count[0]) if scalar else count


def bisection_singular_values(B: BidiagonalInput, reltol: float = 4 * EPS, smallest: int | None = None) -> np.ndarray:
    """Singular values of B, descending, each bracketed to relative width ``reltol``.

    With ``smallest=k`` only the k smallest are computed.
    """
    if reltol < 4 * EPS:
        raise ValueError("reltol must be at least 4 eps")
    T = golub_kahan_embed(B)
    n = B.n if smallest is None else min(int(smallest), B.n)
    # target j: the (n + j + 1)-th smallest eigenvalue of T, i.e. the j-th smallest sigma
    want = B.n + np.arange(n) + 1
    hi = np.full(n, T.norm_inf() * (1 + 4 * EPS) + np.finfo(float).tiny)
    lo = np.full(n, np.finfo(float).tiny)
    for _ in range(5000):
        active = (hi - lo) > reltol * lo
        if not active.any():
            break
        l, h = lo[active], hi[active]
        wide = h > 2.0 * l
        mid = np.where(wide, np.sqrt(l) * np.sqrt(h), 0.5 * (l + h))
        below = sturm_count(T, mid) >= want[active]
        hi[active] = np.where(below, mid, h)
        lo[active] = np.where(below, l, mid)
    return (0.5 * (lo + hi))[::-1]


class Errors(NamedTuple):
    max_rel_err: float
    two_norm_rel_err: float


def verify(sigma_test, sigma_ref) -> Errors:
    a = np.asarray(sigma_test, dtype=np.float64)
    b = np.asarray(sigma_ref, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    rel = np.abs(a - b) / b
    return Errors(float(rel.max(initial=0.0)), float(np.linalg.norm(rel)))
