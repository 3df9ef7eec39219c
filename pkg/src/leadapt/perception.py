"""Simulated semantic sensing.

Real robots run a detector and reject implausible candidates against known
object geometry; here detection is synthesized from world truth plus noise,
and the same prior-filtering logic picks the winner. Spurious candidates can
out-score true ones on confidence, so the geometric filter does the work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import HandContactParams, NoiseParams
from .errors import DegenerateSurface
from .geometry import Pose2, wrap_angle
from .rng import Stream
from .world import MainObject, ObjectKind, World, current_polygons, current_target_point

SPURIOUS_PREFIX = "spurious-"


@dataclass(frozen=True)
class DetectionCandidate:
    hypothesis: str               # object id, or a spurious marker
    confidence: float
    measured_width: float
    measured_height: float
    measured_target_height: float
    measured_target_point: tuple[float, float]

    def is_spurious(self) -> bool:
        return self.hypothesis.startswith(SPURIOUS_PREFIX)


@dataclass(frozen=True)
class PriorRange:
    width: tuple[float, float]
    height: tuple[float, float]
    target_height: tuple[float, float]

    def admits(self, c: DetectionCandidate) -> bool:
        return (self.width[0] <= c.measured_width <= self.width[1]
                and self.height[0] <= c.measured_height <= self.height[1]
                and self.target_height[0] <= c.measured_target_height <= self.target_height[1])


@dataclass(frozen=True)
class GeometricPriors:
    door: PriorRange = PriorRange((0.7, 1.1), (1.8, 2.3), (0.8, 1.2))
    elevator: PriorRange = PriorRange((0.8, 1.4), (1.9, 2.4), (0.8, 1.4))
    chair: PriorRange = PriorRange((0.3, 0.7), (0.6, 1.2), (0.6, 1.1))

    def for_kind(self, kind: ObjectKind) -> PriorRange:
        return getattr(self, kind.value)


@dataclass(frozen=True)
class TargetEstimate:
    center: tuple[float, float]
    height: float
    normal: float


def _object_width(obj: MainObject) -> float:
    if obj.kind is ObjectKind.ELEVATOR:
        k = obj.kinematics
        return math.hypot(k.gap_b[0] - k.gap_a[0], k.gap_b[1] - k.gap_a[1])
    return obj.width_m()


def sense_candidates(world: World, robot_pose: Pose2, noise: NoiseParams,
                     rng: Stream) -> list[DetectionCandidate]:
    """One noisy candidate per visible object, plus Poisson spurious ones.

    Visibility: target point within sensing range and line of sight from the
    robot (rays hitting the object itself count as seen). Iteration order is
    sorted by object id so the draw sequence is reproducible.
    """
    out: list[DetectionCandidate] = []
    for obj_id in sorted(world.objects):
        obj = world.objects[obj_id]
        target = world.targets.get(obj_id)
        if target is None:
            continue
        tp = current_target_point(obj, target)
        if robot_pose.distance_to(tp) > noise.sensing_range:
            continue
        if not world.has_line_of_sight(robot_pose.x, robot_pose.y, tp, to_object=obj_id):
            continue
        if noise.drop_prob > 0.0 and rng.random() < noise.drop_prob:
            continue
        out.append(DetectionCandidate(
            hypothesis=obj_id,
            confidence=min(max(rng.normal(noise.conf_mu, noise.conf_sigma), 0.0), 1.0),
            measured_width=_object_width(obj) + rng.normal(0.0, noise.sigma_dim),
            measured_height=obj.height_m + rng.normal(0.0, noise.sigma_height),
            measured_target_height=target.height + rng.normal(0.0, noise.sigma_height),
            measured_target_point=(tp[0] + rng.normal(0.0, noise.sigma_pos),
                                   tp[1] + rng.normal(0.0, noise.sigma_pos)),
        ))
    n_spurious = rng.poisson(noise.lambda_fp)
    for i in range(n_spurious):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        dist = rng.uniform(0.5, noise.sensing_range)
        out.append(DetectionCandidate(
            hypothesis=f"{SPURIOUS_PREFIX}{i}",
            confidence=rng.uniform(noise.spurious_conf_lo, noise.spurious_conf_hi),
            measured_width=rng.uniform(0.2, 3.0),
            measured_height=rng.uniform(0.5, 2.6),
            measured_target_height=rng.uniform(0.3, 2.0),
            measured_target_point=(robot_pose.x + dist * math.cos(ang),
                                   robot_pose.y + dist * math.sin(ang)),
        ))
    return out


def filter_by_priors(candidates: list[DetectionCandidate], priors: GeometricPriors,
                     kind: ObjectKind) -> DetectionCandidate | None:
    """Highest-confidence candidate whose geometry fits the kind's priors.

    Ties go to the lexicographically lower hypothesis id.
    """
    ranges = priors.for_kind(kind)
    survivors = [c for c in candidates if ranges.admits(c)]
    if not survivors:
        return None
    return min(survivors, key=lambda c: (-c.confidence, c.hypothesis))


def _nearest_edge(polys: list[list[tuple[float, float]]],
                  point: tuple[float, float]):
    """Closest polygon edge to a point; returns (p0, p1, poly, dist)."""
    best = None
    best_d = math.inf
    for poly in polys:
        n = len(poly)
        for i in range(n):
            p0, p1 = poly[i], poly[(i + 1) % n]
            ex, ey = p1[0] - p0[0], p1[1] - p0[1]
            ll = ex * ex + ey * ey
            if ll < 1e-18:
                continue
            t = ((point[0] - p0[0]) * ex + (point[1] - p0[1]) * ey) / ll
            t = min(max(t, 0.0), 1.0)
            qx, qy = p0[0] + ex * t, p0[1] + ey * t
            d = math.hypot(point[0] - qx, point[1] - qy)
            if d < best_d:
                best_d = d
                best = (p0, p1, poly)
    if best is None:
        return None
    return (*best, best_d)


def estimate_target(world: World, detection: DetectionCandidate) -> TargetEstimate:
    """Target center/height from the measurement; normal from the hosting surface.

    For doors and chairs the normal is sampled along the nearest footprint edge
    (5 points in a 0.2 m window) and averaged; it therefore tracks the leaf as
    the object articulates. Elevator buttons sit on static wall, whose declared
    normal is exact.
    """
    obj = world.objects.get(detection.hypothesis)
    if obj is None:
        raise DegenerateSurface(f"no true object for {detection.hypothesis!r}")
    center = detection.measured_target_point
    if obj.kind is ObjectKind.ELEVATOR:
        target = world.targets.get(obj.id)
        if target is None:
            raise DegenerateSurface(f"{obj.id} has no interaction target")
        return TargetEstimate(center=center, height=detection.measured_target_height,
                              normal=target.normal)
    polys = current_polygons(obj)
    hit = _nearest_edge(polys, center)
    if hit is None:
        raise DegenerateSurface(f"{obj.id} has no surface to sample")
    p0, p1, poly, dist = hit
    if dist > 1.0:
        raise DegenerateSurface(f"measured point {dist:.2f} m from any {obj.id} surface")
    ex, ey = p1[0] - p0[0], p1[1] - p0[1]
    elen = math.hypot(ex, ey)
    if elen < 1e-9:
        raise DegenerateSurface(f"{obj.id} edge degenerate")
    ux, uy = ex / elen, ey / elen
    # Perpendicular pointing away from the polygon interior.
    nx, ny = -uy, ux
    cx = sum(p[0] for p in poly) / len(poly)
    cy = sum(p[1] for p in poly) / len(poly)
    mx, my = (p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0
    if nx * (cx - mx) + ny * (cy - my) > 0:
        nx, ny = -nx, -ny
    # Average the normal over a 0.2 m window around the projection (flat edges
    # make every sample agree; the averaging is the contract, not a smoothing).
    t0 = ((center[0] - p0[0]) * ux + (center[1] - p0[1]) * uy)
    sines = 0.0
    cosines = 0.0
    samples = 0
    for k in range(5):
        t = t0 - 0.1 + 0.05 * k
        if t < 0.0 or t > elen:
            continue
        samples += 1
        sines += ny
        cosines += nx
    if samples < 2:
        raise DegenerateSurface(f"{obj.id} edge too short to sample")
    normal = math.atan2(sines / samples, cosines / samples)
    return TargetEstimate(center=center, height=detection.measured_target_height,
                          normal=wrap_angle(normal))


@dataclass
class HandContactDetector:
    """Debounced hand-on-target test: both thresholds must hold on
    ``debounce_ticks`` consecutive updates."""
    params: HandContactParams = field(default_factory=HandContactParams)
    _streak: int = 0

    def update(self, hand: tuple[float, float, float], target: TargetEstimate) -> bool:
        planar = math.hypot(hand[0] - target.center[0], hand[1] - target.center[1])
        near = planar <= self.params.planar_tol and \
            abs(hand[2] - target.height) <= self.params.height_tol
        self._streak = self._streak + 1 if near else 0
        return self._streak >= self.params.debounce_ticks

    def reset(self):
        self._streak = 0
