"""Benchmark bidiagonals and seeded random corpora."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import BidiagonalInput

DEFAULT_SEED = 42
DEFAULT_GLUE = 1e-4
BLOCK = 21


class Tag(enum.Enum):
    MAT1 = "mat1"
    MAT2 = "mat2"
    MAT3 = "mat3"
    MAT4 = "mat4"
    RANDOM = "random"
    GLUED_WILKINSON = "glued-wilkinson"
    GLUED_CLEMENT = "glued-clement"


@dataclass(frozen=True)
class MatrixKind:
    tag: Tag
    n: int
    seed: int = DEFAULT_SEED
    glue: float = DEFAULT_GLUE

    def __post_init__(self):
        object.__setattr__(self, "tag", Tag(self.tag))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not self.glue > 0:
            raise ValueError("glue must be positive")


def cholesky_bidiagonal(diag, off) -> BidiagonalInput:
    """Upper bidiagonal B with B^T B = T for the SPD tridiagonal T = (off, diag, off)."""
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    n = diag.size
    q = np.empty(n)
    e = np.empty(n - 1)
    q[0] = diag[0]
    for i in range(n - 1):
        e[i] = off[i] ** 2 / q[i]
        q[i + 1] = diag[i + 1] - e[i]
    if not np.all(q > 0):
        raise ValueError("tridiagonal is not positive definite")
    # B^T B has diagonal a_i^2 + b_{i-1}^2 and off-diagonal a_i b_i
    return BidiagonalInput(np.sqrt(q), np.sqrt(off**2 / q[:-1]) if n > 1 else np.empty(0))


def _glued(block_diag, block_off, n, glue):
    nb = -(-n // BLOCK)
    diag = np.tile(block_diag, nb)[:n]
    off = np.tile(np.append(block_off, glue), nb)[: n - 1]
    return cholesky_bidiagonal(diag, off)


def wilkinson_plus(m: int = BLOCK):
    h = (m - 1) / 2
    return np.abs(np.arange(m) - h), np.ones(m - 1)


def clement(m: int = BLOCK):
    i = np.arange(1, m)
    return np.zeros(m), np.sqrt(i * (m - i))


def generate(kind: MatrixKind) -> BidiagonalInput:
    n, tag = int(kind.n), kind.tag
    if tag is Tag.MAT1:
        a = np.arange(n, 0, -1, dtype=np.float64)
        return BidiagonalInput(a, np.ones(n - 1))
    if tag is Tag.MAT2:
        a = np.arange(n, 0, -1, dtype=np.float64)
        return BidiagonalInput(a, a[:-1] / 5)
    if tag is Tag.MAT3:
        return BidiagonalInput(np.ones(n), np.full(n - 1, 2.0))
    if tag is Tag.MAT4:
        return cholesky_bidiagonal(np.full(n, 2.0), np.ones(n - 1))
    if tag is Tag.RANDOM:
        return BidiagonalInput(*random_abs_gaussian(n, kind.seed))
    if tag is Tag.GLUED_WILKINSON:
        d, f = wilkinson_plus()
        return _glued(d + 2.5, f, n, kind.glue)
    if tag is Tag.GLUED_CLEMENT:
        # Clement blocks have spectrum +-(m-1), +-(m-3), ...; shifting by m makes them SPD
        d, f = clement()
        return _glued(d + BLOCK, f, n, kind.glue)
    raise ValueError(tag)


def random_abs_gaussian(n: int, seed: int = DEFAULT_SEED):
    """|N(0,1)| diagonals from a Philox counter-based stream; exact zeros are redrawn."""
    rng = np.random.Generator(np.random.Philox(seed))
    x = np.abs(rng.standard_normal(2 * n - 1))
    while not np.all(x > 0):
        bad = x == 0
        x[bad] = np.abs(rng.standard_normal(int(bad.sum())))
    return x[:n], x[n:]


def mat4_exact(n: int) -> np.ndarray:
    """Closed-form singular values of the (1,2,1) Cholesky factor, descending."""
    # 2 + 2cos(k pi/(n+1)) = 4 sin^2((n+1-k) pi / (2(n+1))), without the cancellation near k = n
    k = np.arange(1, n + 1)
    return 2.0 * np.sin((n + 1 - k) * np.pi / (2 * (n + 1)))
