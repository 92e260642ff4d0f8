"""Command-line front end: compute, generate, verify, bench.

Matrix files look like::

    # optional comments
    n 3
    3.0 1.0
    2.0 0x1.0p+0
    1.0

Tokens are decimal floats or hex float literals.  A zero coupling splits the
problem into independent pieces; negative entries are replaced by their
absolute values (singular values do not depend on signs).
"""
from __future__ import annotations

import argparse
import math
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .core import BidiagonalInput, InputError, RunStats
from .driver import BudgetExceeded, SolverConfig, compute_singular_values
from .oracle import bisection_singular_values, verify
from .testgen import Tag, MatrixKind, generate

ALGOS = ("v1", "v2", "v3", "v4", "v5", "hdlasq", "bisect")
EXIT_OK, EXIT_TOL, EXIT_PARSE, EXIT_BUDGET = 0, 1, 2, 3


class ParseError(ValueError):
    pass


@dataclass
class MatrixFile:
    a: np.ndarray
    b: np.ndarray
    sign_normalized: bool = False
    pieces: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.a.size


def _token(tok: str) -> float:
    try:
        if "0x" in tok.lower():
            return float.fromhex(tok)
        return float(tok)
    except ValueError:
        raise ParseError(f"bad number {tok!r}") from None


def parse_matrix(text: str) -> MatrixFile:
    lines = [ln.split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln[0].startswith("#")]
    if not lines or len(lines[0]) != 2 or lines[0][0] != "n":
        raise ParseError("expected header line 'n <dimension>'")
    try:
        n = int(lines[0][1])
    except ValueError:
        raise ParseError(f"bad dimension {lines[0][1]!r}") from None
    if n < 1:
        raise ParseError("dimension must be positive")
    rows = lines[1:]
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, found {len(rows)}")
    a = np.empty(n)
    b = np.zeros(max(n - 1, 0))
    for i, row in enumerate(rows):
        last = i == n - 1
        if len(row) not in (1, 2) or (len(row) == 1 and not last):
            raise ParseError(f"row {i + 1}: expected 'a_i b_i'")
        a[i] = _token(row[0])
        if len(row) == 2:
            v = _token(row[1])
            if last:
                if v != 0:
                    raise ParseError(f"row {n}: last coupling must be 0 or absent")
            else:
                b[i] = v
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ParseError("entries must be finite")
    neg = bool(np.any(a < 0) or np.any(b < 0))
    a, b = np.abs(a), np.abs(b)
    if np.any(a == 0):
        raise ParseError("zero diagonal entry: matrix is singular")
    mf = MatrixFile(a, b, neg)
    mf.pieces = split_pieces(a, b)
    return mf


def split_pieces(a, b) -> list:
    cuts = [0] + [k + 1 for k in np.flatnonzero(b == 0)] + [a.size]
    return [BidiagonalInput(a[i:j], b[i : j - 1]) for i, j in zip(cuts[:-1], cuts[1:])]


def format_matrix(B: BidiagonalInput, hex_: bool = False) -> str:
    f = float.hex if hex_ else repr
    out = [f"n {B.n}"]
    for i in range(B.n):
        if i < B.n - 1:
            out.append(f"{f(float(B.a[i]))} {f(float(B.b[i]))}")
        else:
            out.append(f(float(B.a[i])))
    return "\n".join(out) + "\n"


def format_value(x: float, hex_: bool = False) -> str:
    if hex_:
        return float.hex(float(x))
    if x == 0 or not math.isfinite(x):
        return repr(float(x))
    e = math.floor(math.log10(abs(x)))
    if -5 <= e < 16:
        return f"{x:.{max(16 - e, 0)}f}"
    return f"{x:.16e}"


def solve(pieces, algo: str, threads: int = 1):
    """Singular values (descending) of the direct sum of ``pieces``."""
    stats = RunStats()
    vals = []
    for B in pieces:
        if algo == "bisect":
            vals.append(bisection_singular_values(B))
            stats.merge(RunStats(n=B.n))
            continue
        variant = "hybrid" if algo == "hdlasq" else algo
        s, st = compute_singular_values(B, SolverConfig(variant=variant, threads=threads))
        vals.append(s)
        stats.merge(st)
    return np.sort(np.concatenate(vals))[::-1], stats


def _load(args) -> MatrixFile:
    if args.input:
        with open(args.input) as fh:
            return parse_matrix(fh.read())
    B = generate(MatrixKind(Tag(args.kind), args.n, args.seed, args.glue))
    return MatrixFile(B.a, B.b, False, [B])


def _emit(lines, path):
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_compute(args) -> int:
    mf = _load(args)
    sig, stats = solve(mf.pieces, args.algo, args.threads)
    lines = [format_value(x, args.hex) for x in sig]
    if mf.sign_normalized:
        print("note: negative entries replaced by absolute values", file=sys.stderr)
    if args.stats:
        d = stats.as_dict()
        d["pieces"] = len(mf.pieces)
        d["sign_normalized"] = int(mf.sign_normalized)
        lines += [f"{k}={v}" for k, v in d.items()]
    _emit(lines, args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    B = generate(MatrixKind(Tag(args.kind), args.n, args.seed, args.glue))
    text = format_matrix(B, args.hex)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _read_values(path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#") or "=" in ln:
                continue
            vals.append(_token(ln))
    return np.sort(np.array(vals))[::-1]


def cmd_verify(args) -> int:
    mf = _load(args)
    ref, _ = solve(mf.pieces, "bisect")
    if args.values:
        test = _read_values(args.values)
    else:
        test, _ = solve(mf.pieces, args.algo, args.threads)
    try:
        err = verify(test, ref)
    except ValueError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_TOL
    print(f"max_rel_err={err.max_rel_err:.6e}")
    print(f"two_norm_rel_err={err.two_norm_rel_err:.6e}")
    return EXIT_OK if err.max_rel_err <= args.reltol else EXIT_TOL


def cmd_bench(args) -> int:
    mf = _load(args)
    rows = []
    for algo in args.algos:
        times = []
        for _ in range(args.repeat):
            t = time.perf_counter()
            _, st = solve(mf.pieces, algo, args.threads)
            times.append(time.perf_counter() - t)
        rows.append((algo, statistics.median(times), st))
    head = f"{'algo':<8} {'time_s':>10} {'iterations':>10} {'iter/sv':>8} {'failures':>8} {'ddefl_%':>8}"
    print(head)
    for algo, t, st in rows:
        print(f"{algo:<8} {t:>10.4f} {st.iterations:>10d} {st.iter_per_sv:>8.3f} "
              f"{st.failures:>8d} {st.d_deflation_pct:>8.2f}")
    return EXIT_OK


def _algo_list(text):
    algos = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [t for t in algos if t not in ALGOS]
    if bad or not algos:
        raise argparse.ArgumentTypeError(f"unknown algo(s) {bad}; choose from {ALGOS}")
    return algos


def _source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--input", metavar="PATH", help="matrix file")
    g.add_argument("--kind", choices=[t.value for t in Tag], help="generated test matrix")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--glue", type=float, default=1e-4,
                   help="coupling between glued blocks; glued-clement uses 21x21 Clement blocks "
                        "shifted by 21 I so they are positive definite, then Cholesky-factored")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dqds", description="Singular values of positive bidiagonal matrices.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("compute", help="print singular values, descending")
    _source(p)
    p.add_argument("--algo", choices=ALGOS, default="v5")
    p.add_argument("--stats", action="store_true", help="append key=value run statistics")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--hex", action="store_true", help="print hex float literals")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("generate", help="write a test matrix file")
    p.add_argument("--kind", choices=[t.value for t in Tag], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--glue", type=float, default=1e-4)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--hex", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="compare against bisection")
    _source(p)
    p.add_argument("--algo", choices=ALGOS, default="v5")
    p.add_argument("--values", metavar="PATH", help="check these values instead of running --algo")
    p.add_argument("--reltol", type=float, default=1e-12)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="iteration and timing table")
    _source(p)
    p.add_argument("--algos", type=_algo_list, default=["v5"])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InputError, OSError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceeded as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
