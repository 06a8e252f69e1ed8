import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from pitchpos import polygon


def regular(n, r=1.0, cx=0.0, cy=0.0, phase=0.0):
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.c_[cx + r * np.cos(t), cy + r * np.sin(t)]


def test_areas():
    sq = polygon.rectangle(0, 0, 2, 3)
    assert polygon.signed_area(sq) == 6.0
    assert polygon.signed_area(sq[::-1]) == -6.0
    assert polygon.area(np.zeros((2, 2))) == 0.0


def test_halfplane_clip_halves_square():
    sq = polygon.rectangle(0, 0, 2, 2)
    half = polygon.clip_halfplane(sq, -1, 0, 1)  # x <= 1
    assert np.isclose(polygon.area(half), 2.0)
    assert len(polygon.clip_halfplane(sq, 1, 0, -5)) == 0


def test_clip_convex_known_overlap():
    a = polygon.rectangle(0, 0, 2, 2)
    b = polygon.rectangle(1, 1, 3, 3)
    assert np.isclose(polygon.area(polygon.clip_convex(a, b)), 1.0)
    # clipper orientation does not matter
    assert np.isclose(polygon.area(polygon.clip_convex(a, b[::-1])), 1.0)
    assert polygon.area(polygon.clip_convex(a, polygon.rectangle(5, 5, 6, 6))) == 0.0


@given(st.integers(3, 12), st.floats(0.2, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 6.3))
def test_clip_convex_matches_raster_estimate(n, r, cx, cy, phase):
    a = regular(n, r, cx, cy, phase)
    b = polygon.rectangle(-1, -1, 1.5, 1)
    got = polygon.area(polygon.clip_convex(a, b))
    # grid estimate of the intersection area
    g = np.linspace(-1, 1.5, 501)[:-1] + 0.0025
    h = np.linspace(-1, 1, 401)[:-1] + 0.0025
    X, Y = np.meshgrid(g, h)
    P = np.c_[X.ravel(), Y.ravel()]
    inside = np.ones(len(P), bool)
    for i in range(n):
        p, q = a[i], a[(i + 1) % n]
        inside &= (q[0] - p[0]) * (P[:, 1] - p[1]) - (q[1] - p[1]) * (P[:, 0] - p[0]) >= 0
    est = inside.mean() * 2.5 * 2
    assert abs(got - est) < 0.02 * max(1.0, 2 * r)


@given(st.integers(3, 10), st.integers(3, 10), st.floats(-1, 1), st.floats(-1, 1))
def test_intersection_is_symmetric_and_bounded(n, m, dx, dy):
    a = regular(n, 1.0)
    b = regular(m, 0.8, dx, dy, 0.3)
    ab = polygon.area(polygon.clip_convex(a, b))
    ba = polygon.area(polygon.clip_convex(b, a))
    assert np.isclose(ab, ba, atol=1e-9)
    assert ab <= min(polygon.area(a), polygon.area(b)) + 1e-9
