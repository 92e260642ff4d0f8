import math

import numpy as np
import pytest

from dqds import BidiagonalInput, bisection_singular_values
from dqds import _kernels
from dqds.core import EPS, Segment, ZArray
from dqds.deflation import (EventKind, bulge_budget, chase_bulge, d_deflate, deflate_2x2, test_split as split_at,
                            test_trailing as trailing)
from dqds.kernel import Kind, TransformOutcome


def sv2(q, e):
    """Oracle sigma^2 of the bidiagonal with squares (q, e), ascending."""
    s = bisection_singular_values(BidiagonalInput(np.sqrt(q), np.sqrt(e)))
    return np.sort(s**2)


def seg_sv2(Z, seg):
    return sv2(Z.q(seg.i0, seg.n0, seg.pp), Z.e(seg.i0, seg.n0, seg.pp))


def test_trailing_one():
    Z = ZArray.from_qe([1.0, 1.0, 2.0], [1.0, 1e-40])
    seg = Segment(0, 2, S=1.0)
    ev = trailing(Z, seg)
    assert ev.kind is EventKind.TRAILING1 and ev.values == [3.0]
    assert seg.n0 == 1 and Z.z[6] == 0.0


def test_trailing_two():
    Z = ZArray.from_qe([1.0, 1.0, 2.0], [1e-40, 1.0])
    seg = Segment(0, 2, S=0.5)
    ev = trailing(Z, seg)
    assert ev.kind is EventKind.TRAILING2 and seg.n0 == 0
    lam = sv2(np.array([1.0, 2.0]), np.array([1.0]))
    np.testing.assert_allclose(sorted(ev.values), lam + 0.5, rtol=1e-14)


def test_trailing_none_and_single_row():
    Z = ZArray.from_qe([1.0, 1.0, 1.0], [1.0, 1.0])
    assert trailing(Z, Segment(0, 2, S=1.0)) is None
    seg = Segment(2, 2, S=0.25)
    ev = trailing(Z, seg)
    assert ev.values == [1.25] and seg.n0 == 1


def test_refined_test_is_stronger():
    # e fails the crude test (c eps)^2 S but passes the refined pair
    S = 1.0
    e = 1e-20
    Z = ZArray.from_qe([1.0, 1.0, 1e-30], [1.0, e])
    assert trailing(Z, Segment(0, 2, S=S), refined=False) is None
    assert trailing(Z, Segment(0, 2, S=S), refined=True) is not None


def test_exact_zero_coupling_deflates_without_shift():
    Z = ZArray.from_qe([1.0, 1.0, 1e-60], [1.0, 0.0])
    ev = trailing(Z, Segment(0, 2, S=0.0))
    assert ev is not None and ev.values == [1e-60]


def test_deflate_2x2_exact():
    Z = ZArray.from_qe([1.0, 1.0], [1.0])
    seg = Segment(0, 1)
    ev = deflate_2x2(Z, seg)
    np.testing.assert_allclose(sorted(ev.values), [((math.sqrt(5) - 1) / 2) ** 2, ((math.sqrt(5) + 1) / 2) ** 2],
                               rtol=1e-15)
    assert len(seg) == 0


def test_split_examples():
    Z = ZArray.from_qe([1.0, 1.0, 1.0], [1e-40, 1.0])
    ev = split_at(Z, Segment(0, 2, S=1.0, sup=0.3))
    assert ev.kind is EventKind.SPLIT and ev.split_at == 0
    top, bottom = ev.children
    assert (top.i0, top.n0, bottom.i0, bottom.n0) == (0, 0, 1, 2)
    assert top.S == bottom.S == 1.0 and top.fresh and bottom.fresh
    assert Z.z[2] == 0.0
    assert split_at(ZArray.from_qe([1.0, 1.0, 1.0], [1.0, 1.0]), Segment(0, 2, S=0.0)) is None
    # the bottom coupling belongs to test_trailing
    assert split_at(ZArray.from_qe([1.0, 1.0, 1.0], [1.0, 1e-40]), Segment(0, 2, S=1.0)) is None


def test_split_picks_lowest():
    Z = ZArray.from_qe(np.ones(6), [1e-40, 1.0, 1e-40, 1.0, 1.0])
    ev = split_at(Z, Segment(0, 5, S=1.0))
    assert ev.split_at == 2


def test_chase_one_step_by_hand():
    # rows: q_1, q_2 = 1, e_1 = 1, bulge x = e_2 = 1 over a zero q_3
    Z = ZArray.from_qe([5.0, 1.0, 0.0], [1.0, 1.0])
    seg = Segment(0, 2, S=0.6 / EPS)  # threshold 0.6: negligible after exactly one step
    rot = chase_bulge(Z, seg)
    assert rot == 1
    assert Z.z[4] == 2.0 and Z.z[2] == 0.5 and Z.z[0] == 5.0


def test_chase_zero_bulge():
    Z = ZArray.from_qe([1.0, 1.0, 0.0], [1.0, 0.0])
    before = Z.z.copy()
    assert chase_bulge(Z, Segment(0, 2, S=1.0)) == 0
    np.testing.assert_array_equal(Z.z, before)


def frob2(Z, seg, with_bulge=True):
    q = Z.q(seg.i0, seg.n0, seg.pp).sum()
    e = Z.e(seg.i0, seg.n0, seg.pp)
    return q + (e.sum() if with_bulge else e[:-1].sum())


def test_chase_to_top_conserves_trace(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        q = np.r_[rng.uniform(0.1, 2, n - 1), 0.0]
        e = rng.uniform(0.1, 2, n - 1)
        Z = ZArray.from_qe(q, e)
        seg = Segment(0, n - 1, S=0.0)  # threshold 0: the bulge always reaches the top
        t0 = frob2(Z, seg)
        rot = chase_bulge(Z, seg, budget=10 * n)
        assert rot == n - 1
        assert frob2(Z, seg, with_bulge=False) == pytest.approx(t0, rel=4 * n * EPS)


def test_chase_preserves_singular_values(rng):
    n = 6
    q = np.r_[rng.uniform(0.5, 2, n - 1), 0.0]
    e = rng.uniform(0.5, 2, n - 1)
    Z = ZArray.from_qe(q, e)
    B = np.diag(np.sqrt(q)) + np.diag(np.sqrt(e), 1)
    ref = np.sort(np.linalg.svd(B, compute_uv=False))
    chase_bulge(Z, Segment(0, n - 1), budget=100)
    B2 = np.diag(np.sqrt(Z.q()))
    B2[:-1, :-1] += np.diag(np.sqrt(Z.e()[:-1]), 1)
    np.testing.assert_allclose(np.sort(np.linalg.svd(B2, compute_uv=False)), ref, rtol=1e-12, atol=1e-14)


def test_chase_budget_exhaustion():
    Z = ZArray.from_qe([1.0] * 5 + [0.0], [1.0] * 5)
    assert chase_bulge(Z, Segment(0, 5, S=0.0), budget=2) == -1


def test_bulge_budget():
    assert bulge_budget(1) == 10 and bulge_budget(1000) == 100


def _ready(rng, n, k_small):
    """Array whose next zero-shift pass has d_k tiny at row k_small, plus S making it negligible."""
    q = rng.uniform(0.5, 2, n)
    e = rng.uniform(0.5, 2, n - 1)
    q[k_small] = 1e-30
    e[k_small - 1] = 1e-30
    return q, e


def option_a(z, seg, thresh):
    """Restructure as the d-deflating pass does, then one zero-shift dqd pass (test oracle)."""
    z = z.copy()
    kind, *_ = _kernels.dqd_deflating_pass(z, seg.i0, seg.n0, seg.pp, thresh)
    assert kind == _kernels.DEFLATED
    pp = 1 - seg.pp
    kind, *_ = _kernels.dqds_pass(z, seg.i0, seg.n0, pp, 0.0)
    pp = 1 - pp
    # the pass leaves q_n = 0 and e_{n-1} = 0
    assert z[4 * seg.n0 + pp] == 0.0 and z[4 * seg.n0 - 2 + pp] == 0.0
    return z[4 * seg.i0 + pp : 4 * seg.n0 + pp : 4], z[4 * seg.i0 + 2 + pp : 4 * seg.n0 - 2 + pp : 4]


def test_d_deflate_three_by_three():
    # one zero-shift pass over q=e=1 gives d = 1, 1/2, 1/3; pretend S is large enough that d_2 is negligible
    Z = ZArray.from_qe([1.0, 1.0, 1.0], [1.0, 1.0])
    seg = Segment(0, 2, S=0.6 / EPS, dmin=0.5, dmink=1)
    pre = seg_sv2(Z, seg)
    probe = TransformOutcome(Kind.SUCCESS, 0.5, 1, 0.0, 0.0, 0.0)
    ev, out = d_deflate(Z, seg, probe)
    assert ev.kind is EventKind.DDEFLATE and ev.values == [seg.S]
    assert len(seg) == 2 and out.ok
    post = np.r_[0.0, seg_sv2(Z, seg)]
    assert np.all(np.abs(post - pre) <= 0.5 * (1 + 1e-12))


def test_d_deflate_criterion_fails():
    Z = ZArray.from_qe([1.0, 1.0, 1.0], [1.0, 1.0])
    seg = Segment(0, 2, S=1.0)
    probe = TransformOutcome(Kind.SUCCESS, 10 * EPS, 1, 0.0, 0.0, 0.0)
    before = Z.z.copy()
    assert d_deflate(Z, seg, probe) == (None, None)
    np.testing.assert_array_equal(Z.z, before)
    assert d_deflate(Z, Segment(0, 2, S=0.0), TransformOutcome(Kind.SUCCESS, 0.0, 1, 0, 0, 0)) == (None, None)


def test_d_deflate_at_bottom_needs_no_rotation():
    Z = ZArray.from_qe([1.0, 1.0, 1e-40], [1.0, 1e-40])
    seg = Segment(0, 2, S=1.0)
    ev, _ = d_deflate(Z, seg, TransformOutcome(Kind.SUCCESS, 1e-40, 2, 0, 0, 0))
    assert ev.rotations_used == 0 and ev.values == [1.0]


def test_d_deflate_ordinary_pass_when_nothing_small(rng):
    Z = ZArray.from_qe(rng.uniform(1, 2, 5), rng.uniform(0.1, 0.2, 4))
    seg = Segment(0, 4, S=1.0)
    pre = seg_sv2(Z, seg)
    ev, out = d_deflate(Z, seg, TransformOutcome(Kind.SUCCESS, 0.0, 1, 0, 0, 0))
    assert ev is None and out.ok and seg.pp == 1
    np.testing.assert_allclose(seg_sv2(Z, seg), pre, rtol=1e-13)


def test_d_deflate_abandons_on_budget():
    Z = ZArray.from_qe([1.0] * 8, [1.0] * 7)
    Z.z[4 * 3] = 1e-30
    seg = Segment(0, 7, S=1.0)
    before = Z.z[0::2].copy()
    # S = 1 makes the bulge threshold eps: with a 1-rotation budget the chase cannot finish
    ev, out = d_deflate(Z, seg, TransformOutcome(Kind.SUCCESS, 1e-30, 3, 0, 0, 0), budget=1)
    assert ev is None and out is None
    assert seg.pp == 0 and len(seg) == 8
    np.testing.assert_array_equal(Z.z[0::2], before)


def test_options_a_and_b_agree(rng):
    for _ in range(30):
        n = 5
        k = int(rng.integers(1, n - 1))
        q, e = _ready(rng, n, k)
        Z = ZArray.from_qe(q, e)
        seg = Segment(0, n - 1, S=1e3)
        qa, ea = option_a(Z.z, seg, EPS * seg.S)
        ev, _ = d_deflate(Z, seg, TransformOutcome(Kind.SUCCESS, 0.0, k, 0, 0, 0), budget=100)
        assert ev is not None
        np.testing.assert_allclose(seg_sv2(Z, seg), sv2(qa, ea), rtol=10 * n * EPS)
