"""Outer dqds loop for variants V1..V5 and the hybrid with aggressive early deflation."""
from __future__ import annotations

import math
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from . import deflation as dfl
from . import _kernels
from .core import EPS, BidiagonalInput, InputError, RunStats, Segment, ZArray, flip_segment, should_flip
from .kernel import Kind, TransformOutcome, dqds_sweep, retry_late_failure
from .shift import ShiftHistory, ShiftPolicy, adapt_alpha, choose_shift, update_sup

VARIANTS = ("v1", "v2", "v3", "v4", "v5", "hybrid")

# callables receiving (stats, upsilon) after every completed run
run_listeners: list = []


class BudgetExceeded(RuntimeError):
    def __init__(self, msg, stats):
        super().__init__(msg)
        self.stats = stats


@dataclass
class SolverConfig:
    variant: str = "v5"
    p_aed: float = 50
    c: float = dfl.C_DEFLATE
    p_twist: int = 20
    alpha0: float = 0.75
    alpha_min: float = 0.25
    alpha_max: float = 0.96
    flip: bool = True
    force_twisted: bool = False
    threads: int = 1
    # optional sink; receives (segment bottom row, e_{n0-1}) after every accepted sweep
    trace: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.variant = self.variant.lower()
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not 0 < self.alpha_min <= self.alpha0 <= self.alpha_max < 1:
            raise ValueError("need 0 < alpha_min <= alpha0 <= alpha_max < 1")

    @property
    def level(self) -> int:
        return 5 if self.variant == "hybrid" else int(self.variant[1])

    @property
    def hybrid(self) -> bool:
        return self.variant == "hybrid"

    def policy(self) -> ShiftPolicy:
        lv = self.level
        return ShiftPolicy(
            sup_updates=lv >= 3,
            p_twist=self.p_twist if lv >= 4 else 2,
            kahan_2x2=lv >= 5,
            force_twisted=self.force_twisted,
        )


def iteration_budget(n: int, alpha_min: float, eps: float = EPS, alpha_max: float | None = None) -> int:
    """Worst-case sweeps per singular value, ceil(log_{1/beta}(n/eps))."""
    alpha_max = alpha_min if alpha_max is None else alpha_max
    beta = max(alpha_max, 1.0 - alpha_min)
    return max(1, math.ceil(math.log(n / eps) / math.log(1.0 / beta)))


def _rayleigh_sup(Z: ZArray, seg: Segment) -> float:
    # lambda_min(B B^T) <= any diagonal entry of B B^T
    q = Z.q(seg.i0, seg.n0, seg.pp)
    e = Z.e(seg.i0, seg.n0, seg.pp)
    if q.size == 0:
        return math.inf
    if e.size:
        return float(min(q[-1], np.min(q[:-1] + e)))
    return float(q[-1])


class _SegmentRun:
    """Drives one segment until it finishes or splits."""

    def __init__(self, Z, seg, cfg, n_total, upsilon):
        self.Z, self.seg, self.cfg = Z, seg, cfg
        self.policy = cfg.policy()
        self.refined = cfg.level >= 2
        self.n_total = n_total
        self.upsilon = upsilon
        self.stats = RunStats()
        self.values = []
        self.children = ()
        self.hist = ShiftHistory()
        self.since = 0
        self.rounds_since_aed = 0
        self.ddefl_blocked_at = -1

    def _extract(self, vals, counter):
        self.values.extend(vals)
        setattr(self.stats, counter, getattr(self.stats, counter) + len(vals))
        self.stats.max_iter_per_value = max(self.stats.max_iter_per_value, self.since)
        self.since = 0

    def _after_deflation(self, tag):
        seg = self.seg
        self.hist = ShiftHistory(deflated=tag)
        if seg.n0 >= seg.i0:
            seg.sup = _rayleigh_sup(self.Z, seg)
            seg.dmin = math.inf
            seg.dmink = seg.n0

    def _count(self, k=1):
        self.stats.iterations += k
        self.since += k
        self.rounds_since_aed += k

    def _accept(self, s, out):
        seg = self.seg
        fresh = seg.fresh
        seg.add_shift(s)
        seg.dmin, seg.dmink = out.dmin, out.dmink
        seg.dn, seg.dn1, seg.dn2 = out.dn, out.dn1, out.dn2
        if fresh:
            seg.sup = out.dmin
        else:
            update_sup(seg, s, out, self.policy.sup_updates)
        adapt_alpha(seg, out)
        self.hist = ShiftHistory(prev_success_shift=s, last_shift=s)
        if self.cfg.trace is not None and seg.n0 > seg.i0:
            self.cfg.trace.append((seg.n0, self.Z.z[4 * (seg.n0 - 1) + 2 + seg.pp]))

    def _fail(self, s, out):
        st = self.stats
        st.failures += 1
        if out.kind is Kind.LATE_FAILURE:
            st.late_failures += 1
        else:
            st.early_failures += 1
        update_sup(self.seg, s, out, self.policy.sup_updates)
        adapt_alpha(self.seg, out)

    def run(self):
        Z, seg, cfg = self.Z, self.seg, self.cfg
        if cfg.flip and should_flip(Z, seg):
            flip_segment(Z, seg)
        while seg.n0 >= seg.i0:
            m = len(seg)
            if m == 1:
                self._extract(dfl.test_trailing(Z, seg, cfg.c, self.refined).values, "classical_deflations")
                break
            if m == 2:
                self._extract(dfl.deflate_2x2(Z, seg).values, "classical_deflations")
                break
            ev = dfl.test_trailing(Z, seg, cfg.c, self.refined)
            if ev is not None:
                self._extract(ev.values, "classical_deflations")
                self._after_deflation(len(ev.values))
                continue
            if not seg.fresh:
                ev = dfl.test_split(Z, seg, cfg.c, self.refined)
                if ev is not None:
                    self.stats.split_events += 1
                    self.children = ev.children
                    for child in self.children:
                        child.alpha = seg.alpha
                    return self
            if cfg.hybrid and self.rounds_since_aed >= cfg.p_aed and m > math.sqrt(self.n_total):
                self.rounds_since_aed = 0
                w = math.ceil(1.5 * math.sqrt(m))
                if m > 2 * w:
                    vals = aed_window(Z, seg, w, cfg.c)
                    if vals:
                        self._extract(vals, "aed_deflations")
                        self._after_deflation(-1)
                        continue
            if (cfg.level >= 1 and not seg.fresh and seg.S > 0 and seg.dmin <= EPS * seg.S
                    and self.ddefl_blocked_at != m):
                probe = TransformOutcome(Kind.SUCCESS, seg.dmin, seg.dmink, seg.dn, seg.dn1, seg.dn2)
                ev, out = dfl.d_deflate(Z, seg, probe)
                self._count()
                if ev is not None:
                    self._extract(ev.values, "d_deflations")
                    self._after_deflation(-1)
                    continue
                if out is not None:
                    self._accept(0.0, out)
                    continue
                self.ddefl_blocked_at = m
            self._sweep()
            if self.stats.iterations > self.cap:
                raise BudgetExceeded(
                    f"iteration cap {self.cap} exceeded on rows {seg.i0}..{seg.n0}", self.stats)
        return self

    def _sweep(self):
        Z, seg = self.Z, self.seg
        dec = choose_shift(Z, seg, self.hist, self.policy)
        s = dec.s
        out = dqds_sweep(Z, seg, s)
        self._count()
        if out.ok:
            self._accept(s, out)
            return
        self._fail(s, out)
        if out.kind is Kind.LATE_FAILURE:
            out2, s2 = retry_late_failure(Z, seg, s, out.dn)
            self._count(2 if (s2 == 0.0 and s + out.dn > 0.0) else 1)
            self._accept(s2, out2)
        else:
            self.hist = ShiftHistory(failed=True, last_shift=s,
                                     prev_success_shift=self.hist.prev_success_shift)


def aed_window(Z: ZArray, seg: Segment, w: int, c: float = dfl.C_DEFLATE) -> list:
    """Simplified aggressive early deflation over the trailing ``w`` rows.

    Walks up from the bottom, extracting rows whose coupling passes the trailing
    tests with constant 100c, or whose q is negligible (the coupling is then
    chased away).  Stops at the first row that does not qualify.  Returns the
    extracted sigma^2 values.
    """
    vals = []
    stop = seg.n0 - w
    while seg.n0 > stop and len(seg) > 2:
        ev = dfl.test_trailing(Z, seg, 100.0 * c)
        if ev is not None:
            vals.extend(ev.values)
            continue
        if seg.S > 0 and Z.z[4 * seg.n0 + seg.pp] <= EPS * seg.S:
            Z.z[4 * seg.n0 + seg.pp] = 0.0
            dfl.chase_bulge(Z, seg, budget=len(seg))
            Z.z[4 * (seg.n0 - 1) + 2 + seg.pp] = 0.0
            seg.n0 -= 1
            vals.append(seg.shifted(0.0))
            continue
        break
    return vals


def compute_singular_values(B: BidiagonalInput, config: SolverConfig | None = None):
    """All singular values of B, descending, with run statistics."""
    cfg = config or SolverConfig()
    n = B.n
    upsilon = iteration_budget(n, cfg.alpha_min, alpha_max=cfg.alpha_max)
    stats = RunStats(n=n)
    cap = n * upsilon + 10 * n
    # power-of-two scaling is exact and keeps squares away from overflow
    k = int(np.frexp(max(B.a.max(), B.b.max(initial=0.0)))[1])
    a, b = np.ldexp(B.a, -k), np.ldexp(B.b, -k)
    tiny = _remove_tiny(a, b, cfg.c, upsilon, stats)
    m = a.size
    if m == 0:
        for f in run_listeners:
            f(stats, upsilon)
        return np.ldexp(np.sort(tiny)[::-1], k), stats
    Z = _squares(a, b)
    values = []

    def work(seg):
        r = _SegmentRun(Z, seg, cfg, n, upsilon)
        r.cap = cap
        return r.run()

    root = Segment(0, m - 1, pp=0, alpha=cfg.alpha0)
    if cfg.threads <= 1:
        stack = [root]
        while stack:
            r = work(stack.pop())
            _collect(r, stats, values, cap)
            stack.extend(reversed(r.children))
    else:
        with ThreadPoolExecutor(cfg.threads) as pool:
            pending = {pool.submit(work, root)}
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    r = fut.result()
                    _collect(r, stats, values, cap)
                    pending |= {pool.submit(work, ch) for ch in r.children}
    sig = np.concatenate([np.sqrt(np.asarray(values, dtype=np.float64)), tiny])
    sig = np.sort(sig)[::-1]
    stats.n = n
    for f in run_listeners:
        f(stats, upsilon)
    return np.ldexp(sig, k), stats


# singular values below this (relative to a largest entry in [1/2, 1)) would
# have squares too close to the underflow threshold for the qd variables
TINY_SIGMA = 2.0**-450


def _remove_tiny(a, b, c, upsilon, stats):
    """Peel off singular values whose squares would underflow.

    Runs unsquared zero-shift sweeps, which drive the smallest singular value
    to the bottom row, and deflates it once b_{n-1} <= c eps a_n (a relative
    perturbation of size c eps).  Shrinks a and b in place via resize and
    returns the peeled values in the order they were found (ascending).
    """
    found = []
    m = a.size
    since = 0
    while m > 1 and _kernels.unsquared_dmin(a, b, m) < TINY_SIGMA and since < upsilon:
        while since < upsilon:
            _kernels.oqd_pass(a, b, m)
            stats.iterations += 1
            since += 1
            if b[m - 2] <= c * EPS * a[m - 1]:
                found.append(float(a[m - 1]))
                stats.classical_deflations += 1
                stats.max_iter_per_value = max(stats.max_iter_per_value, since)
                m -= 1
                since = 0
                break
    if m == 1 and a[0] < TINY_SIGMA:
        found.append(float(a[0]))
        stats.classical_deflations += 1
        m = 0
    a.resize(m, refcheck=False)
    b.resize(max(m - 1, 0), refcheck=False)
    return found


def _squares(a, b) -> ZArray:
    q, e = a * a, b * b
    if not np.all(q > 0) or not np.all(np.isfinite(q)):
        raise InputError("squared diagonal entries under/overflow binary64")
    # an underflowed coupling is an exact split, handled by the deflation tests
    return ZArray.from_qe(q, e)


def _collect(r, stats, values, cap):
    values.extend(r.values)
    r.stats.n = 0
    stats.merge(r.stats)
    if stats.iterations > cap:
        raise BudgetExceeded(f"total iteration cap {cap} exceeded", stats)


def hdlasq(B: BidiagonalInput, config: SolverConfig | None = None):
    cfg = config or SolverConfig(variant="hybrid")
    if cfg.variant != "hybrid":
        cfg = SolverConfig(**{**cfg.__dict__, "variant": "hybrid"})
    return compute_singular_values(B, cfg)
