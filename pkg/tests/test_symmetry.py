import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mc_tube_failures
from symreach.dynamics import make_model
from symreach.geometry import HyperRect, Reachtube
from symreach.reach import compute_reachtube
from symreach.symmetry import (DegenerateModeError, UnsupportedUnsafeSet, build_map,
                               check_equivariance, virtual_param)

BUILDING = HyperRect([0, -np.inf, 11.9, 5.1], [np.inf, np.inf, 12.9, 6.1])


@pytest.fixture(scope="module")
def aircraft():
    return make_model("aircraft4d")


def test_example_mode_angle(aircraft):
    m = build_map(aircraft, [2.5, 0.5, 13.3, 5.0])
    assert m.theta == pytest.approx(math.atan2(-10.8, 4.5))
    assert m.theta == pytest.approx(-1.176, abs=1e-3)


def test_northbound_mode_has_zero_angle(aircraft):
    m = build_map(aircraft, [3.0, -1.0, 3.0, 7.0])
    assert m.theta == 0.0 and not m.rotates


def test_identity_map(aircraft):
    m = build_map(aircraft, [0.0, -1.0, 0.0, 0.0])
    x = np.random.default_rng(0).normal(size=(50, 4))
    assert np.array_equal(m.forward(x), x) and np.array_equal(m.inverse(x), x)
    t = Reachtube(x[:5], x[:5] + 1, 0.1)
    assert m.transform_tube(t) == t


def test_round_trip_points(aircraft):
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = rng.uniform(-20, 20, 4)
        m = build_map(aircraft, p)
        x = rng.uniform(-20, 20, size=(100, 4))
        assert np.allclose(m.inverse(m.forward(x)), x, atol=1e-12)


def test_destination_maps_to_origin(aircraft):
    p = np.array([1.0, 2.0, -4.0, 6.0])
    m = build_map(aircraft, p)
    y = m.forward([1.7, 0.3, -4.0, 6.0])
    assert np.allclose(y[2:], 0.0)
    assert np.allclose(m.rho(p)[2:], 0.0)
    assert np.array_equal(m.rho(p), virtual_param(aircraft))


def test_degenerate_mode(aircraft):
    with pytest.raises(DegenerateModeError):
        build_map(aircraft, [1.0, 1.0, 1.0, 1.0])


def test_translation_preserves_box_volume(aircraft):
    m = build_map(aircraft, [0.0, -3.0, 0.0, 5.0])
    r = HyperRect([1, 0, 2, 3], [2, 0.5, 4, 3.5])
    out = m.transform_rect(r)
    assert out == HyperRect([1, 0, 2, 3 - 5], [2, 0.5, 4, 3.5 - 5])
    assert out.volume() == r.volume()


def test_quarter_turn_square_grows(aircraft):
    m = build_map(aircraft, [1.0, 0.0, 0.0, 1.0])
    assert m.theta == pytest.approx(math.pi / 4)
    out = m.transform_rect(HyperRect([1, 0, 0, 0], [1, 0, 1, 1])).project([2, 3])
    assert np.allclose(out.widths, math.sqrt(2))
    assert out.volume() == pytest.approx(2.0)


def test_round_trip_rect_covers_original(aircraft):
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = build_map(aircraft, rng.uniform(-10, 10, 4))
        lo = rng.uniform(-5, 5, 4)
        r = HyperRect(lo, lo + rng.uniform(0, 2, 4))
        assert m.transform_rect(m.transform_rect(r), "inverse").contains(r)


def test_rect_image_contains_sample_images(aircraft):
    rng = np.random.default_rng(4)
    m = build_map(aircraft, [2.5, 0.5, 13.3, 5.0])
    r = HyperRect([1, math.pi / 4, 3, 1], [2, math.pi / 3, 4, 2])
    out = m.transform_rect(r)
    assert all(out.contains_point(y) for y in m.forward(r.sample(rng, 1000)))


def test_building_under_identity_is_unchanged(aircraft):
    m = build_map(aircraft, [0.0, -1.0, 0.0, 0.0])
    assert m.transform_unsafe(BUILDING) == BUILDING


def test_building_translated_to_unit_box(aircraft):
    m = build_map(aircraft, [11.9, 0.0, 11.9, 5.1])
    out = m.transform_unsafe(BUILDING)
    assert np.allclose(out.lo[2:], [0, 0]) and np.allclose(out.hi[2:], [1, 1])
    assert out.lo[0] == 0 and out.hi[0] == np.inf
    assert np.isinf(out.lo[1]) and np.isinf(out.hi[1])


def test_building_quarter_turn(aircraft):
    m = build_map(aircraft, [1.0, 0.0, 0.0, 0.0])
    assert m.theta == pytest.approx(math.pi / 2)
    out = m.transform_unsafe(BUILDING)
    assert np.allclose(out.lo[2:], [5.1, -12.9]) and np.allclose(out.hi[2:], [6.1, -11.9])
    assert out.lo[0] == 0 and out.hi[0] == np.inf and np.isinf(out.lo[1])


def test_unbounded_position_cannot_rotate(aircraft):
    m = build_map(aircraft, [1.0, 0.0, 0.0, 0.0])
    with pytest.raises(UnsupportedUnsafeSet):
        m.transform_unsafe(HyperRect([0, -np.inf, 0, -np.inf], [np.inf, np.inf, 1, np.inf]))


def test_translation_shifts_every_box():
    lin = make_model("linear3d")
    m = build_map(lin, [0, 0, 0, 4.0, -2.0, 1.0])
    t = Reachtube([[0, 0, 0], [1, 1, 1]], [[1, 1, 1], [2, 2, 2]], 0.5)
    out = m.transform_tube(t)
    assert np.array_equal(out.lo - t.lo, np.tile([-4.0, 2.0, -1.0], (2, 1)))
    assert np.array_equal(out.hi - t.hi, out.lo - t.lo)


@pytest.mark.parametrize("model,kind", [("aircraft4d", "translation_rotation"),
                                        ("linear3d", "translation"),
                                        ("rotlinear3d", "translation_rotation")])
def test_exact_symmetries_pass(model, kind):
    m = make_model(model)
    smap = build_map(m, [1.0, -2.0, 0.5, 3.0, 4.0, 0.5][:m.m], kind)
    rep = check_equivariance(m, smap, 1000)
    assert rep.passed and rep.max_residual <= 1e-9


def test_linear_rotation_is_not_a_symmetry():
    m = make_model("linear3d")
    rep = check_equivariance(m, build_map(m, [1.0, -2.0, 0, 3.0, 4.0, 0], "translation_rotation"))
    assert not rep.passed and rep.max_residual > 0.1


def test_inverse_image_of_virtual_tube_contains_real_runs(aircraft):
    p = np.array([2.5, 0.5, 13.3, 5.0])
    K = HyperRect([1.9, 0.9, 3.0, 1.0], [2.0, 0.91, 4.0, 2.0])
    m = build_map(aircraft, p)
    K_v = m.transform_rect(K)
    tube_v = compute_reachtube(aircraft, K_v, m.rho(p), 5.0)
    tube = m.transform_tube(tube_v, "inverse")
    assert mc_tube_failures(aircraft, tube, K, p, count=200) == 0


def test_state_jacobian_is_invertible(aircraft):
    rng = np.random.default_rng(5)
    for _ in range(20):
        J = build_map(aircraft, rng.uniform(-10, 10, 4)).state_jacobian
        assert np.allclose(J @ np.linalg.inv(J), np.eye(4), atol=1e-12)
        assert np.allclose(np.linalg.inv(J), J.T, atol=1e-12)


dyadic = st.integers(-1280, 1280).map(lambda k: k / 64)
coords = st.floats(-20, 20, allow_nan=False)


def _pair(lo, w):
    return (HyperRect(lo[:4], np.add(lo[:4], w[:4])), HyperRect(lo[4:], np.add(lo[4:], w[4:])))


@settings(max_examples=200)
@given(st.lists(dyadic, min_size=8, max_size=8), st.lists(dyadic.map(abs), min_size=8, max_size=8),
       dyadic, dyadic, st.integers(1, 640).map(lambda k: k / 64))
def test_translation_preserves_intersection(lo, w, gx, gy, back):
    # source due south of the destination: no rotation, exact shifts
    m = build_map(make_model("aircraft4d"), [gx, gy - back, gx, gy])
    a, b = _pair(lo, w)
    assert a.intersects(b) == m.transform_rect(a).intersects(m.transform_unsafe(b))


@settings(max_examples=200)
@given(st.lists(coords, min_size=8, max_size=8), st.lists(st.floats(0, 5), min_size=8, max_size=8),
       coords, coords, st.floats(0.5, 10))
def test_translation_never_loses_intersection(lo, w, gx, gy, back):
    m = build_map(make_model("aircraft4d"), [gx, gy - back, gx, gy])
    a, b = _pair(lo, w)
    if a.intersects(b):
        assert m.transform_rect(a).intersects(m.transform_unsafe(b))
