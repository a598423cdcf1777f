import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from vsg_doa.geometry import (
    clip_to_window,
    distance_to_polygon,
    point_in_polygon,
    points_in_polygon,
    polyline_self_intersects,
    polylines_cross,
    segment_intersection,
    shoelace_area,
)
from vsg_doa.integrator import Window

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def star(n=7, r0=1.0, r1=0.4):
    ang = np.linspace(0, 2 * np.pi, 2 * n, endpoint=False)
    r = np.where(np.arange(2 * n) % 2 == 0, r0, r1)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def test_shoelace_square_and_orientation():
    assert shoelace_area(SQUARE) == 1.0
    assert shoelace_area(SQUARE[::-1]) == 1.0


def test_shoelace_degenerate():
    assert shoelace_area(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])) == 0.0
    assert shoelace_area(SQUARE[:2]) == 0.0


def test_shoelace_matches_shapely():
    poly = star()
    assert shoelace_area(poly) == pytest.approx(Polygon(poly).area, rel=1e-12)


def test_point_in_polygon_basic():
    assert point_in_polygon(SQUARE, 0.5, 0.5)
    assert not point_in_polygon(SQUARE, 1.5, 0.5)


def test_boundary_tie_rule():
    assert point_in_polygon(SQUARE, 1.0, 0.3)
    assert point_in_polygon(SQUARE, 1.0 + 5e-10, 0.3)
    assert not point_in_polygon(SQUARE, 1.0 + 1e-6, 0.3)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1.2, 1.2), y=st.floats(-1.2, 1.2))
def test_membership_matches_shapely(x, y):
    poly = star()
    shape = Polygon(poly)
    if shape.exterior.distance(Point(x, y)) < 1e-7:
        return
    assert point_in_polygon(poly, x, y) == shape.contains(Point(x, y))


def test_vectorised_membership_agrees():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.2, 1.2, size=(5000, 2))
    poly = star()
    fast = points_in_polygon(poly, pts, chunk=777)
    slow = np.array([point_in_polygon(poly, x, y) for x, y in pts])
    assert np.array_equal(fast, slow)
    assert np.array_equal(fast, shapely.contains_xy(Polygon(poly), pts[:, 0], pts[:, 1]))


def test_distance_to_polygon():
    assert distance_to_polygon(SQUARE, 2.0, 0.5) == pytest.approx(1.0)
    assert distance_to_polygon(SQUARE, 0.5, 0.5) == pytest.approx(0.5)


def test_segment_intersection():
    assert segment_intersection((0, 0), (2, 0), (1, -1), (1, 1)) == pytest.approx(0.5)
    assert segment_intersection((0, 0), (2, 0), (3, -1), (3, 1)) is None
    assert segment_intersection((0, 0), (1, 0), (0, 1), (1, 1)) is None


def test_self_intersection():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    assert polyline_self_intersects(bowtie)
    assert not polyline_self_intersects(SQUARE, closed=True)
    assert polyline_self_intersects(bowtie, closed=True)
    spiral = np.array([[np.cos(t) * t, np.sin(t) * t] for t in np.linspace(0.1, 20, 400)])
    assert not polyline_self_intersects(spiral)


def test_polylines_cross():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert polylines_cross(a, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not polylines_cross(a, np.array([[0.0, 1.0], [1.0, 2.0]]))


def test_clip_to_window():
    win = Window(-1.0, 1.0, -1.0, 1.0)
    line = np.array([[0.0, 0.0], [0.5, 0.0], [1.5, 0.5], [2.0, 0.0]])
    clipped, hit = clip_to_window(line, win)
    assert hit
    np.testing.assert_allclose(clipped[-1], [1.0, 0.25])
    whole, hit = clip_to_window(line[:2], win)
    assert not hit and len(whole) == 2
    with pytest.raises(ValueError):
        clip_to_window(line[2:], win)
