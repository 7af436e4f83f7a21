import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from symreach.geometry import (AlignmentError, HyperRect, Reachtube, export_rows, hull_of,
                               union_all)


def tube(boxes, step=0.5, ftime=0.0):
    lo = [b[0] for b in boxes]
    hi = [b[1] for b in boxes]
    return Reachtube(lo, hi, step, ftime)


# -- HyperRect ----------------------------------------------------------------

def test_disjoint_intersection_is_absent():
    a = HyperRect([0, 0], [1, 1])
    assert a.intersect(HyperRect([2, 2], [3, 3])) is None
    assert not a.intersects(HyperRect([2, 2], [3, 3]))


def test_touching_boxes_intersect_on_the_boundary():
    a = HyperRect([0, 0], [1, 1])
    r = a.intersect(HyperRect([1, 0], [2, 1]))
    assert r == HyperRect([1, 0], [1, 1])


def test_volume_edge_product():
    assert HyperRect([0, 0], [1, 2]).volume() == 2.0
    assert HyperRect([0, -np.inf], [1, np.inf]).volume() == np.inf
    assert HyperRect([0, -np.inf], [0, np.inf]).volume() == 0.0


def test_pad_widens_each_side():
    assert HyperRect([0], [1]).minkowski_pad([0.5]) == HyperRect([-0.5], [1.5])
    with pytest.raises(ValueError):
        HyperRect([0], [1]).minkowski_pad([-0.1])


def test_rect_validation():
    with pytest.raises(ValueError):
        HyperRect([1, 0], [0, 1])
    with pytest.raises(ValueError):
        HyperRect([0, 0], [1])
    with pytest.raises(ValueError):
        HyperRect([], [])
    with pytest.raises(ValueError):
        HyperRect([0, 0], [1, 1]).hull(HyperRect([0], [1]))


def test_rect_arrays_are_read_only():
    r = HyperRect([0, 0], [1, 1])
    with pytest.raises(ValueError):
        r.lo[0] = 5


def test_contains_and_project():
    a = HyperRect([0, 0, 0], [2, 2, 2])
    assert a.contains(HyperRect([0.5, 0, 1], [1, 2, 2]))
    assert not a.contains(HyperRect([0.5, 0, 1], [1, 2, 2.1]))
    assert a.contains_point([2, 0, 1])
    assert a.project([2, 0]) == HyperRect([0, 0], [2, 2])


def test_hull_of_many():
    rs = [HyperRect([i, -i], [i + 1, 0]) for i in range(4)]
    assert hull_of(rs) == HyperRect([0, -3], [4, 0])


finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def rects(draw, n=None):
    n = n or draw(st.integers(1, 4))
    a = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    w = np.array(draw(st.lists(st.floats(0, 20), min_size=n, max_size=n)))
    return HyperRect(a, a + w)


@settings(max_examples=300)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(rects(n), rects(n))))
def test_hull_properties(pair):
    a, b = pair
    h = a.hull(b)
    assert h.contains(a) and h.contains(b)
    assert h.volume() >= max(a.volume(), b.volume())
    i = a.intersect(b)
    if i is not None:
        assert a.contains(i) and b.contains(i)
        assert i.volume() <= min(a.volume(), b.volume())


# -- tube operators: examples ---------------------------------------------------

def test_union_idempotent_example():
    t = tube([([0], [1]), ([1], [2])])
    assert t.union(t) == t


def test_union_keeps_longer_tail():
    a = tube([([0], [1])] * 3)
    b = tube([([1], [2])] * 5)
    u = a.union(b)
    assert len(u) == 5
    assert np.array_equal(u.lo[:3, 0], [0, 0, 0]) and np.array_equal(u.hi[:3, 0], [2, 2, 2])
    assert np.array_equal(u.lo[3:, 0], [1, 1]) and np.array_equal(u.hi[3:, 0], [2, 2])


def test_union_hull_by_hand():
    u = tube([([0], [1])]).union(tube([([2], [3])]))
    assert u == tube([([0], [3])])


def test_union_merges_initial_sets():
    a = Reachtube([[0]], [[1]], 0.5, 0.0, HyperRect([0], [1]))
    b = Reachtube([[0]], [[1]], 0.5, 0.0, HyperRect([3], [4]))
    assert a.union(b).init_set == HyperRect([0], [4])


def test_union_alignment_errors():
    a = tube([([0], [1])])
    with pytest.raises(AlignmentError):
        a.union(tube([([0], [1])], step=0.25))
    with pytest.raises(AlignmentError):
        a.union(tube([([0], [1])], ftime=0.5))


def test_time_shift_examples():
    t = tube([([0], [1]), ([1], [2])])
    assert t.time_shift(0) == t
    s = t.time_shift(2)
    assert np.allclose(s.t_lo, [2, 2.5]) and np.allclose(s.t_hi, [2.5, 3])
    assert t.time_shift(1).time_shift(1) == t.time_shift(2)
    with pytest.raises(ValueError):
        t.time_shift(-1)


def test_concat_examples():
    a = tube([([0], [1]), ([1], [2])])
    assert a.concat(Reachtube.empty(1, 0.5)) == a
    c = a.concat(a)
    assert len(c) == 4 and c.ftime == 0 and c.etime == 2.0
    assert c.etime == a.etime + a.etime
    with pytest.raises(AlignmentError):
        a.concat(a.time_shift(1))
    with pytest.raises(AlignmentError):
        a.concat(tube([([0], [1])], step=0.25))


def test_empty_tube_is_identity():
    a = tube([([0], [1])], ftime=1.0)
    e = Reachtube.empty(1, 0.5, 1.0)
    assert e.union(a) == a and a.union(e) == a
    assert Reachtube.empty(1, 0.5, 1.0).concat(tube([([0], [1])])) == a


def test_truncate_examples():
    t = tube([([0], [1]), ([1], [2]), ([2], [3])])
    assert len(t.truncate(0.9)) == 2
    assert t.truncate(t.etime) == t
    assert len(t.truncate(t.step)) == 1
    for bad in (0.0, -1.0, 1.6):
        with pytest.raises(ValueError):
            t.truncate(bad)


def test_covering_segments():
    t = tube([([0], [1])] * 3)
    assert t.covering_segments(0.25) == [0]
    assert t.covering_segments(0.5) == [0, 1]
    assert t.covering_segments(1.5) == [2]
    assert t.covering_segments(2.0) == []


def test_export_rows_layout():
    t = tube([([0, 1], [1, 2]), ([1, 1], [2, 3])], ftime=1.0)
    rows = export_rows(t, "a", 2, seg_offset=5)
    assert rows[1] == ["a", 2, 6, 1.5, 2.0, 1.0, 1.0, 2.0, 3.0]


def test_union_all_matches_pairwise():
    ts = [tube([([i], [i + 1])] * (i + 1)) for i in range(4)]
    pair = ts[0]
    for t in ts[1:]:
        pair = pair.union(t)
    assert union_all(ts) == pair


# -- tube operators: properties -------------------------------------------------

@st.composite
def tubes(draw, n=None, step=None, ftime=None, min_len=1):
    n = n or draw(st.integers(1, 3))
    step = step or draw(st.sampled_from([0.1, 0.25, 0.5, 1.0]))
    if ftime is None:
        ftime = step * draw(st.integers(0, 20))
    L = draw(st.integers(min_len, 8))
    lo = draw(hnp.arrays(float, (L, n), elements=finite))
    w = draw(hnp.arrays(float, (L, n), elements=st.floats(0, 5)))
    return Reachtube(lo, lo + w, step, ftime)


@st.composite
def aligned_pairs(draw):
    a = draw(tubes())
    b = draw(tubes(n=a.dim, step=a.step, ftime=a.ftime))
    return a, b


def check_invariants(t):
    assert np.all(t.lo <= t.hi)
    assert np.allclose(t.t_hi[:-1], t.t_lo[1:])
    assert np.allclose(t.t_hi - t.t_lo, t.step, atol=1e-12)
    if len(t):
        assert math.isclose(t.t_lo[0], t.ftime) and math.isclose(t.t_hi[-1], t.etime)


@settings(max_examples=200)
@given(aligned_pairs())
def test_union_commutative_and_idempotent(pair):
    a, b = pair
    u = a.union(b)
    check_invariants(u)
    assert u == b.union(a)
    assert u.union(u) == u
    assert a.union(a) == a
    assert len(u) == max(len(a), len(b))


@settings(max_examples=200)
@given(tubes(), st.data())
def test_concat_then_truncate_restores(a, data):
    b = data.draw(tubes(n=a.dim, step=a.step, ftime=0.0))
    c = a.concat(b)
    check_invariants(c)
    assert len(c) == len(a) + len(b)
    assert math.isclose(c.etime - c.ftime, (a.etime - a.ftime) + (b.etime - b.ftime))
    assert c.truncate(a.etime) == a


@settings(max_examples=200)
@given(tubes(), st.integers(0, 20), st.integers(0, 20))
def test_time_shift_composes(a, i, j):
    s1, s2 = i * a.step, j * a.step
    x = a.time_shift(s1).time_shift(s2)
    y = a.time_shift(s1 + s2)
    check_invariants(x)
    assert x.allclose(y, atol=0) and math.isclose(x.ftime, y.ftime, abs_tol=1e-9)


@settings(max_examples=200)
@given(tubes(), st.data())
def test_truncate_is_minimal_prefix(a, data):
    k = data.draw(st.integers(1, len(a)))
    frac = data.draw(st.floats(0.01, 1.0))
    tc = a.ftime + (k - 1 + frac) * a.step
    t = a.truncate(tc)
    check_invariants(t)
    assert len(t) == k
    assert t.etime >= tc - 1e-9 and t.etime - t.step < tc
