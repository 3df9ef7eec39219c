"""2D poses, angle arithmetic, and small polygon helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = (a + math.pi) % TWO_PI - math.pi
    return math.pi if a == -math.pi else a


def rotate(vx: float, vy: float, angle: float) -> tuple[float, float]:
    """Rotate a 2D vector by angle (radians, CCW)."""
    c, s = math.cos(angle), math.sin(angle)
    return (c * vx - s * vy, s * vx + c * vy)


@dataclass(frozen=True)
class Pose2:
    """Planar pose; heading is kept normalized to (-pi, pi]."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Pose2 | tuple[float, float]") -> float:
        ox, oy = (other.x, other.y) if isinstance(other, Pose2) else other
        return math.hypot(self.x - ox, self.y - oy)

    def bearing_to(self, point: tuple[float, float]) -> float:
        """Relative bearing from this pose's heading to a world point."""
        return wrap_angle(math.atan2(point[1] - self.y, point[0] - self.x) - self.heading)

    def moved(self, dx: float, dy: float, dheading: float = 0.0) -> "Pose2":
        return Pose2(self.x + dx, self.y + dy, self.heading + dheading)


def polygon_centroid(vertices: list[tuple[float, float]]) -> tuple[float, float]:
    """Area centroid of a simple polygon (shoelace)."""
    a2 = 0.0
    cx = cy = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        cross = x0 * y1 - x1 * y0
        a2 += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    if abs(a2) < 1e-12:
        # Degenerate: fall back to vertex mean.
        return (sum(v[0] for v in vertices) / n, sum(v[1] for v in vertices) / n)
    return (cx / (3.0 * a2), cy / (3.0 * a2))


def rect_vertices(cx: float, cy: float, half_len: float, half_wid: float,
                  angle: float) -> list[tuple[float, float]]:
    """Corners of an oriented rectangle, CCW starting at (+len, +wid)."""
    corners = [(half_len, half_wid), (-half_len, half_wid),
               (-half_len, -half_wid), (half_len, -half_wid)]
    out = []
    for px, py in corners:
        rx, ry = rotate(px, py, angle)
        out.append((cx + rx, cy + ry))
    return out


def transform_point(point: tuple[float, float], pivot: tuple[float, float],
                    angle: float, translation: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float]:
    """Rotate ``point`` about ``pivot`` by ``angle`` then translate."""
    rx, ry = rotate(point[0] - pivot[0], point[1] - pivot[1], angle)
    return (pivot[0] + rx + translation[0], pivot[1] + ry + translation[1])
