import math

from hypothesis import given, strategies as st

from leadapt.geometry import Pose2, polygon_centroid, rect_vertices, rotate, transform_point, wrap_angle

finite_angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@given(finite_angles)
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi


@given(st.floats(min_value=-10, max_value=10), st.integers(min_value=-50, max_value=50))
def test_wrap_angle_periodic(a, k):
    assert abs(wrap_angle(a + 2 * math.pi * k) - wrap_angle(a)) < 1e-9


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.0) == 0.0


def test_pose_normalizes_heading():
    p = Pose2(0.0, 0.0, 3 * math.pi)
    assert abs(p.heading - math.pi) < 1e-12


def test_bearing_to():
    p = Pose2(1.0, 1.0, math.pi / 2)
    # Point straight ahead (north of the pose) has zero relative bearing.
    assert abs(p.bearing_to((1.0, 3.0))) < 1e-12
    # Point to the east is 90 degrees clockwise = -pi/2 relative.
    assert abs(p.bearing_to((3.0, 1.0)) + math.pi / 2) < 1e-12


def test_rotate_quarter_turn():
    x, y = rotate(1.0, 0.0, math.pi / 2)
    assert abs(x) < 1e-12 and abs(y - 1.0) < 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5), finite_angles)
def test_transform_point_roundtrip(x, y, ang):
    pivot = (0.7, -0.3)
    fwd = transform_point((x, y), pivot, ang)
    back = transform_point(fwd, pivot, -ang)
    assert abs(back[0] - x) < 1e-6 and abs(back[1] - y) < 1e-6


def test_rect_vertices_and_centroid():
    verts = rect_vertices(2.0, 3.0, 0.5, 0.25, 0.0)
    cx, cy = polygon_centroid(verts)
    assert abs(cx - 2.0) < 1e-12 and abs(cy - 3.0) < 1e-12
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    assert abs(max(xs) - min(xs) - 1.0) < 1e-12
    assert abs(max(ys) - min(ys) - 0.5) < 1e-12


def test_distance_and_moved():
    p = Pose2(0.0, 0.0, 0.0)
    assert abs(p.distance_to((3.0, 4.0)) - 5.0) < 1e-12
    q = p.moved(1.0, 2.0, dheading=1.0)
    assert (q.x, q.y, q.heading) == (1.0, 2.0, 1.0)
