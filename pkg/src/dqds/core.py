"""Data model shared by the solver: input bidiagonal, the ping-pong qd array and segments.

Rows are addressed with 0-based absolute indices into the qd array.  Row ``j`` of
the bank selected by parity ``pp`` lives at::

    q_j = z[4*j + pp]        e_j = z[4*j + 2 + pp]

and the opposite bank at ``4*j + 1 - pp`` / ``4*j + 3 - pp``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS = 2.0**-52


class InputError(ValueError):
    """Raised for bidiagonal data that violates the positivity contract."""


@dataclass(frozen=True)
class BidiagonalInput:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64).ravel()
        b = np.ascontiguousarray(self.b, dtype=np.float64).ravel()
        if a.size < 1:
            raise InputError("need at least one diagonal entry")
        if b.size != a.size - 1:
            raise InputError(f"expected {a.size - 1} superdiagonal entries, got {b.size}")
        for name, v in (("diagonal", a), ("superdiagonal", b)):
            if not np.all(np.isfinite(v)):
                raise InputError(f"{name} contains NaN or infinity")
            if np.any(v <= 0):
                raise InputError(f"{name} entries must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.size

    def dense(self) -> np.ndarray:
        return np.diag(self.a) + np.diag(self.b, 1)


@dataclass
class ZArray:
    z: np.ndarray
    pingpong: int = 0

    @property
    def n(self) -> int:
        return self.z.size // 4

    def q(self, i0=0, n0=None, pp=None) -> np.ndarray:
        pp = self.pingpong if pp is None else pp
        n0 = self.n - 1 if n0 is None else n0
        return self.z[4 * i0 + pp : 4 * n0 + pp + 1 : 4].copy()

    def e(self, i0=0, n0=None, pp=None) -> np.ndarray:
        """Couplings e_{i0} .. e_{n0-1} of the selected bank."""
        pp = self.pingpong if pp is None else pp
        n0 = self.n - 1 if n0 is None else n0
        return self.z[4 * i0 + 2 + pp : 4 * n0 + 2 + pp : 4].copy()

    @classmethod
    def from_qe(cls, q, e) -> "ZArray":
        q = np.asarray(q, dtype=np.float64)
        e = np.asarray(e, dtype=np.float64)
        n = q.size
        z = np.zeros(4 * n)
        z[0::4] = q
        z[2 : 4 * (n - 1) : 4] = e
        return cls(z, 0)


@dataclass
class RunStats:
    n: int = 0
    iterations: int = 0
    failures: int = 0
    early_failures: int = 0
    late_failures: int = 0
    classical_deflations: int = 0
    split_events: int = 0
    d_deflations: int = 0
    aed_deflations: int = 0
    max_iter_per_value: int = 0

    @property
    def iter_per_sv(self) -> float:
        return self.iterations / self.n if self.n else 0.0

    @property
    def d_deflation_pct(self) -> float:
        return 100.0 * self.d_deflations / self.n if self.n else 0.0

    def merge(self, other: "RunStats") -> None:
        for name in ("n", "iterations", "failures", "early_failures", "late_failures",
                     "classical_deflations", "split_events", "d_deflations", "aed_deflations"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.max_iter_per_value = max(self.max_iter_per_value, other.max_iter_per_value)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "iterations": self.iterations,
            "failures": self.failures,
            "early_failures": self.early_failures,
            "late_failures": self.late_failures,
            "classical_deflations": self.classical_deflations,
            "split_events": self.split_events,
            "d_deflations": self.d_deflations,
            "aed_deflations": self.aed_deflations,
            "max_iter_per_value": self.max_iter_per_value,
            "iter_per_sv": self.iter_per_sv,
            "d_deflation_pct": self.d_deflation_pct,
        }


@dataclass
class Segment:
    i0: int
    n0: int
    pp: int = 0
    S: float = 0.0
    S_lo: float = 0.0  # compensation term of S
    sup: float = math.inf
    dmin: float = -1.0  # negative marks a fresh segment
    dmink: int = -1
    dn: float = 0.0
    dn1: float = 0.0
    dn2: float = 0.0
    alpha: float = 0.75
    fail_streak: int = 0
    flipped: bool = False
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.n0 - self.i0 + 1

    @property
    def fresh(self) -> bool:
        return self.dmin < 0

    def add_shift(self, s: float) -> None:
        # TwoSum; shifts enter every negligibility test through S
        t = self.S + s
        bp = t - self.S
        err = (self.S - (t - bp)) + (s - bp)
        self.S = t
        self.S_lo += err

    def shifted(self, x: float) -> float:
        """x + accumulated shift, rounded once."""
        return math.fsum((self.S, self.S_lo, x))


def init_z_from_bidiagonal(B: BidiagonalInput) -> ZArray:
    n = B.n
    z = np.zeros(4 * n)
    with np.errstate(over="ignore", under="ignore"):
        z[0::4] = B.a * B.a
        if n > 1:
            z[2 : 4 * (n - 1) : 4] = B.b * B.b
    if not np.all(z[0::4] > 0) or not np.all(z[2 : 4 * (n - 1) : 4] > 0):
        raise InputError("squared entries under/overflow binary64")
    if not np.all(np.isfinite(z)):
        raise InputError("squared entries overflow binary64")
    return ZArray(z, 0)


def flip_segment(Z: ZArray, seg: Segment) -> None:
    """Reverse the row order of the current bank of ``seg`` in place.

    The represented matrix becomes P B^T P, which has the same singular values.
    """
    z, pp, i0, n0 = Z.z, seg.pp, seg.i0, seg.n0
    z[4 * i0 + pp : 4 * n0 + pp + 1 : 4] = z[4 * i0 + pp : 4 * n0 + pp + 1 : 4][::-1].copy()
    if n0 > i0:
        sl = slice(4 * i0 + 2 + pp, 4 * n0 + 2 + pp, 4)
        z[sl] = z[sl][::-1].copy()
    seg.flipped = not seg.flipped


def should_flip(Z: ZArray, seg: Segment) -> bool:
    """Larger entries belong at the top: compare quarter-means of q at both ends."""
    m = len(seg)
    if m < 4:
        return False
    q = Z.q(seg.i0, seg.n0, seg.pp)
    k = max(1, m // 4)
    return q[-k:].mean() > q[:k].mean()


def eig2(qa: float, ea: float, qb: float) -> tuple[float, float]:
    """Both eigenvalues of B B^T for the 2x2 bidiagonal with squares (qa, ea, qb).

    Every term is non-negative, so both roots keep high relative accuracy.
    """
    disc = (qa + ea - qb) ** 2 + 4.0 * qb * ea
    big = 0.5 * ((qa + ea + qb) + math.sqrt(disc))
    small = (qa * qb) / big if big > 0 else 0.0
    return big, small
