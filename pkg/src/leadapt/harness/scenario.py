"""Scenario files: schema-versioned JSON with ASCII map rows.

The first map row is the top of the map (reads like a floor plan); '#' cells
are occupied, '.' cells free. Every parse error carries the JSON field path
that caused it.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import SessionConfig, apply_overrides
from ..errors import OutOfBounds, ScenarioError
from ..geometry import Pose2
from ..orchestrator import Task
from ..world import (ChairKinematics, DoorKinematics, ElevatorKinematics,
                     GridMap, InteractionTarget, MainObject, ObjectKind,
                     TargetKind, World)

SCHEMA_VERSION = 1

_KIN_TYPES = {"door", "elevator", "chair"}


def _fail(path: str, detail: str):
    raise ScenarioError(f"{path}: {detail}")


def _get(data: dict, key: str, path: str, kind=None, required=True, default=None):
    if key not in data:
        if required:
            _fail(f"{path}.{key}" if path else key, "missing required field")
        return default
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if not isinstance(kind, tuple) else \
            "/".join(k.__name__ for k in kind)
        _fail(f"{path}.{key}" if path else key, f"expected {names}")
    return value


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    return float(value)


def _point(value, path: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        _fail(path, "expected [x, y]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _parse_kinematics(data: dict, path: str):
    ktype = _get(data, "type", path, str)
    if ktype == "door":
        swing = int(_number(_get(data, "swing", path), f"{path}.swing"))
        if swing not in (-1, 1):
            _fail(f"{path}.swing", "expected +1 (CCW) or -1 (CW)")
        return DoorKinematics(
            hinge=_point(_get(data, "hinge", path), f"{path}.hinge"),
            swing=swing,
            max_angle=_number(_get(data, "max_angle", path), f"{path}.max_angle"))
    if ktype == "elevator":
        cabin = _get(data, "cabin", path, list)
        if len(cabin) != 4:
            _fail(f"{path}.cabin", "expected [x0, y0, x1, y1]")
        return ElevatorKinematics(
            gap_a=_point(_get(data, "gap_a", path), f"{path}.gap_a"),
            gap_b=_point(_get(data, "gap_b", path), f"{path}.gap_b"),
            panel_thickness=_number(_get(data, "panel_thickness", path, required=False,
                                         default=0.08), f"{path}.panel_thickness"),
            cabin=tuple(_number(v, f"{path}.cabin[{i}]") for i, v in enumerate(cabin)),
            open_delay=_number(_get(data, "open_delay", path), f"{path}.open_delay"),
            open_duration=_number(_get(data, "open_duration", path),
                                  f"{path}.open_duration"))
    if ktype == "chair":
        return ChairKinematics(
            pull_axis=_point(_get(data, "pull_axis", path), f"{path}.pull_axis"),
            max_pull=_number(_get(data, "max_pull", path), f"{path}.max_pull"))
    _fail(f"{path}.type", f"unknown kinematics type {ktype!r} "
          f"(expected one of {sorted(_KIN_TYPES)})")


def _parse_object(data: dict, path: str) -> MainObject:
    oid = _get(data, "id", path, str)
    kind_s = _get(data, "kind", path, str)
    try:
        kind = ObjectKind(kind_s)
    except ValueError:
        _fail(f"{path}.kind", f"unknown object kind {kind_s!r}")
    fp = _get(data, "footprint", path, list)
    if len(fp) < 2:
        _fail(f"{path}.footprint", "needs at least 2 points")
    footprint = tuple(_point(p, f"{path}.footprint[{i}]") for i, p in enumerate(fp))
    kin = _parse_kinematics(_get(data, "kinematics", path, dict), f"{path}.kinematics")
    expected = {ObjectKind.DOOR: DoorKinematics, ObjectKind.ELEVATOR: ElevatorKinematics,
                ObjectKind.CHAIR: ChairKinematics}[kind]
    if not isinstance(kin, expected):
        _fail(f"{path}.kinematics.type", f"does not match object kind {kind_s!r}")
    return MainObject(
        id=oid, kind=kind, footprint=footprint,
        state=_number(_get(data, "state", path, required=False, default=0.0),
                      f"{path}.state"),
        kinematics=kin,
        height_m=_number(_get(data, "height_m", path, required=False, default=2.0),
                         f"{path}.height_m"))


def _parse_target(data: dict, path: str, ids: set[str]) -> InteractionTarget:
    owner = _get(data, "owner", path, str)
    if owner not in ids:
        _fail(f"{path}.owner", f"unknown object id {owner!r}")
    kind_s = _get(data, "kind", path, str)
    try:
        kind = TargetKind(kind_s)
    except ValueError:
        _fail(f"{path}.kind", f"unknown target kind {kind_s!r}")
    return InteractionTarget(
        owner=owner,
        point=_point(_get(data, "point", path), f"{path}.point"),
        height=_number(_get(data, "height", path), f"{path}.height"),
        normal=_number(_get(data, "normal", path), f"{path}.normal"),
        kind=kind)


@dataclass
class Scenario:
    raw: dict                     # canonical content; the hash covers this
    name: str
    seed: int
    resolution: float
    rows: list[str]
    objects: list[MainObject]
    targets: list[InteractionTarget]
    tasks: list[Task]
    robot_start: Pose2
    user_start: tuple[float, float]
    config: SessionConfig = field(default_factory=SessionConfig)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(canonical_bytes(self.raw)).hexdigest()

    def build_world(self) -> World:
        """Fresh mutable world (episodes articulate objects and bump grids)."""
        rows = len(self.rows)
        cols = len(self.rows[0])
        static = np.zeros((rows, cols), dtype=bool)
        for i, line in enumerate(self.rows):
            static[rows - 1 - i] = [ch == "#" for ch in line]
        # The outer ring is always a wall, whatever the map rows say.
        static[0, :] = static[-1, :] = True
        static[:, 0] = static[:, -1] = True
        grid = GridMap(resolution=self.resolution, static=static)
        return World(grid, objects=list(self.objects), targets=list(self.targets))

    def session_config(self) -> SessionConfig:
        return copy.deepcopy(self.config)


def canonical_bytes(raw: dict) -> bytes:
    return json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()


def parse_scenario(data: dict, name: str | None = None) -> Scenario:
    """Validate and build a Scenario; raises ScenarioError with field paths."""
    if not isinstance(data, dict):
        raise ScenarioError(": expected a JSON object")
    schema = _get(data, "schema", "", int)
    if isinstance(schema, bool) or schema != SCHEMA_VERSION:
        _fail("schema", f"unsupported schema {schema!r} (expected {SCHEMA_VERSION})")

    resolution = _number(_get(data, "resolution", "", required=False, default=0.05),
                         "resolution")
    if resolution <= 0.0:
        _fail("resolution", "must be positive")
    rows = _get(data, "map", "", list)
    if not rows:
        _fail("map", "must have at least one row")
    width = None
    for i, line in enumerate(rows):
        if not isinstance(line, str) or not line:
            _fail(f"map[{i}]", "expected a non-empty string")
        if width is None:
            width = len(line)
        elif len(line) != width:
            _fail(f"map[{i}]", f"row length {len(line)} != {width}")
        bad = set(line) - {".", "#"}
        if bad:
            _fail(f"map[{i}]", f"invalid cells {sorted(bad)!r} (use '.' and '#')")

    objects = [_parse_object(o, f"objects[{i}]")
               for i, o in enumerate(_get(data, "objects", "", list, required=False,
                                          default=[]))]
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        _fail("objects", f"duplicate object ids {dup!r}")
    id_set = set(ids)

    targets = [_parse_target(t, f"targets[{i}]", id_set)
               for i, t in enumerate(_get(data, "targets", "", list, required=False,
                                          default=[]))]
    owners = [t.owner for t in targets]
    if len(set(owners)) != len(owners):
        _fail("targets", "multiple targets for one object")
    target_owners = set(owners)

    tasks = []
    for i, t in enumerate(_get(data, "tasks", "", list, required=False, default=[])):
        path = f"tasks[{i}]"
        if not isinstance(t, dict):
            _fail(path, "expected an object")
        oid = _get(t, "object", path, str)
        if oid not in id_set:
            _fail(f"{path}.object", f"unknown object id {oid!r}")
        if oid not in target_owners:
            _fail(f"{path}.object", f"object {oid!r} has no interaction target")
        kind_s = _get(t, "kind", path, str)
        try:
            kind = ObjectKind(kind_s)
        except ValueError:
            _fail(f"{path}.kind", f"unknown object kind {kind_s!r}")
        obj = next(o for o in objects if o.id == oid)
        if obj.kind is not kind:
            _fail(f"{path}.kind", f"{kind_s!r} does not match object "
                  f"{oid!r} of kind {obj.kind.value!r}")
        tasks.append(Task(object_id=oid, kind=kind))

    rs = _get(data, "robot_start", "", list)
    if len(rs) != 3:
        _fail("robot_start", "expected [x, y, heading]")
    robot_start = Pose2(_number(rs[0], "robot_start[0]"),
                        _number(rs[1], "robot_start[1]"),
                        _number(rs[2], "robot_start[2]"))
    user_start = _point(_get(data, "user_start", ""), "user_start")

    seed = _get(data, "seed", "", int, required=False, default=0)
    if isinstance(seed, bool):
        _fail("seed", "expected an integer")

    config = SessionConfig()
    overrides = _get(data, "config", "", dict, required=False, default={})
    noise = _get(data, "noise", "", dict, required=False, default=None)
    if noise is not None:
        overrides = {**overrides, "noise": {**overrides.get("noise", {}), **noise}}
    try:
        apply_overrides(config, overrides)
    except KeyError as exc:
        _fail("config", f"unknown parameter {exc.args[0]!r}")
    except (TypeError, ValueError) as exc:
        _fail("config", str(exc))

    scenario = Scenario(raw=data, name=name or str(data.get("name", "scenario")),
                        seed=seed, resolution=resolution, rows=rows,
                        objects=objects, targets=targets, tasks=tasks,
                        robot_start=robot_start, user_start=user_start,
                        config=config)
    _check_start_poses(scenario)
    return scenario


def _check_start_poses(scenario: Scenario):
    world = scenario.build_world()
    geo = scenario.config.geometry
    for label, point, radius in (
            ("robot_start", (scenario.robot_start.x, scenario.robot_start.y),
             geo.robot_radius),
            ("user_start", scenario.user_start, geo.user_radius)):
        try:
            clearance = world.clearance(point)
        except OutOfBounds:
            _fail(label, "outside the map")
        if not math.isfinite(clearance) or clearance < radius:
            _fail(label, f"collides with the map (clearance {clearance:.3f} m "
                  f"< radius {radius})")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read ({exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    name = data.get("name", path.stem) if isinstance(data, dict) else path.stem
    return parse_scenario(data, name=name)
