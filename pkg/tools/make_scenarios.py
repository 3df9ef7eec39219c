"""Regenerate the packaged scenario fixtures.

Maps are authored here as fill_rect calls on a GridMap and serialized to the
ASCII rows the scenario schema wants; run this after changing any geometry:

    python3 tools/make_scenarios.py
"""
import json
import math
from pathlib import Path

from leadapt.world import GridMap

OUT = Path(__file__).resolve().parent.parent / "src" / "leadapt" / "scenarios"
RES = 0.05
PI_2 = math.pi / 2

NOISELESS = {"conf_mu": 1.0, "conf_sigma": 0.0}
MILD_NOISE = {"sigma_pos": 0.005, "sigma_height": 0.005, "drop_prob": 0.01,
              "lambda_fp": 0.01, "conf_mu": 0.9, "conf_sigma": 0.03}


def rows_from_grid(grid: GridMap) -> list[str]:
    lines = []
    for r in range(grid.rows - 1, -1, -1):   # first row is the top of the map
        lines.append("".join("#" if grid.static[r, c] else "."
                             for c in range(grid.cols)))
    return lines


def door_in_wall(grid: GridMap, door_id: str, hinge, swing=1, leaf=0.9):
    """Door leaf closing a 1 m gap in an east-west wall (matches the
    integration-test fixture)."""
    x0, y0 = hinge
    grid.fill_rect(0.0, y0 - 0.05, x0 - 0.05, y0 + 0.05)
    grid.fill_rect(x0 + 0.95, y0 - 0.05, grid.cols * grid.resolution, y0 + 0.05)
    obj = {
        "id": door_id, "kind": "door",
        "footprint": [[x0, y0 - 0.02], [x0 + leaf, y0 - 0.02],
                      [x0 + leaf, y0 + 0.02], [x0, y0 + 0.02]],
        "state": 0.0, "height_m": 2.0,
        "kinematics": {"type": "door", "hinge": [x0, y0], "swing": swing,
                       "max_angle": PI_2},
    }
    tgt = {"owner": door_id, "point": [x0 + leaf - 0.08, y0], "height": 1.0,
           "normal": -PI_2, "kind": "handle"}
    return obj, tgt


def door_scenario(name: str, swing: int, seed: int, height: float = 8.0) -> dict:
    # Pull doors (swing -1) sweep toward the approach side, so the cost field
    # would otherwise favour a stop cell behind the doorway; keeping the far
    # side a narrow corridor (height 5.0) makes those cells clearance-starved
    # while still leaving the crossing passable.
    grid = GridMap.empty(10.0, height, RES)
    obj, tgt = door_in_wall(grid, "front-door", (4.0, 4.0), swing=swing)
    return {
        "schema": 1, "name": name, "resolution": RES, "seed": seed,
        "map": rows_from_grid(grid),
        "objects": [obj], "targets": [tgt],
        "tasks": [{"object": "front-door", "kind": "door"}],
        "robot_start": [4.5, 1.2, PI_2], "user_start": [5.0, 0.9],
        "noise": dict(NOISELESS),
    }


def elevator_scenario(seed: int) -> dict:
    grid = GridMap.empty(10.0, 8.0, RES)
    # Shaft wall with a 1 m gap, cabin boxed in behind it.
    grid.fill_rect(5.95, 0.0, 6.05, 3.5)
    grid.fill_rect(5.95, 4.5, 6.05, 8.0)
    grid.fill_rect(6.05, 3.2, 7.5, 3.3)
    grid.fill_rect(6.05, 4.7, 7.5, 4.8)
    grid.fill_rect(7.4, 3.2, 7.5, 4.8)
    obj = {
        "id": "lift", "kind": "elevator",
        "footprint": [[6.0, 3.5], [6.0, 4.5]],
        "state": 0.0, "height_m": 2.2,
        "kinematics": {"type": "elevator", "gap_a": [6.0, 3.5],
                       "gap_b": [6.0, 4.5], "panel_thickness": 0.08,
                       "cabin": [6.05, 3.3, 7.4, 4.7],
                       "open_delay": 1.0, "open_duration": 2.0},
    }
    tgt = {"owner": "lift", "point": [6.0, 3.2], "height": 1.1,
           "normal": math.pi, "kind": "call_button"}
    return {
        "schema": 1, "name": "elevator", "resolution": RES, "seed": seed,
        "map": rows_from_grid(grid),
        "objects": [obj], "targets": [tgt],
        "tasks": [{"object": "lift", "kind": "elevator"}],
        "robot_start": [3.0, 3.2, 0.0], "user_start": [2.7, 2.7],
        "noise": dict(NOISELESS),
    }


def chair_scenario(seed: int) -> dict:
    grid = GridMap.empty(8.0, 8.0, RES)
    obj = {
        "id": "desk-chair", "kind": "chair",
        "footprint": [[3.775, 3.775], [4.225, 3.775],
                      [4.225, 4.225], [3.775, 4.225]],
        "state": 0.0, "height_m": 0.9,
        "kinematics": {"type": "chair", "pull_axis": [0.0, -1.0],
                       "max_pull": 0.9},
    }
    tgt = {"owner": "desk-chair", "point": [4.0, 3.775], "height": 0.85,
           "normal": -PI_2, "kind": "seat_back"}
    return {
        "schema": 1, "name": "chair", "resolution": RES, "seed": seed,
        "map": rows_from_grid(grid),
        "objects": [obj], "targets": [tgt],
        "tasks": [{"object": "desk-chair", "kind": "chair"}],
        "robot_start": [4.0, 1.0, PI_2], "user_start": [4.5, 0.7],
        "noise": dict(NOISELESS),
        # The exit leg bends tightly around the pulled-out chair; the room has
        # no doorways, so widen the planning margin past the pure-pursuit
        # corner cut.
        "config": {"lead": {"inflate_margin": 0.15}},
    }


def route_scenario(seed: int) -> dict:
    grid = GridMap.empty(10.0, 12.0, RES)
    d1, t1 = door_in_wall(grid, "door-a", (4.0, 4.0))
    d2, t2 = door_in_wall(grid, "door-b", (6.0, 8.0))
    return {
        "schema": 1, "name": "route", "resolution": RES, "seed": seed,
        "map": rows_from_grid(grid),
        "objects": [d1, d2], "targets": [t1, t2],
        "tasks": [{"object": "door-a", "kind": "door"},
                  {"object": "door-b", "kind": "door"}],
        "robot_start": [4.5, 1.2, PI_2], "user_start": [5.0, 0.9],
        "noise": dict(MILD_NOISE),
    }


def empty_scenario(seed: int) -> dict:
    grid = GridMap.empty(4.0, 4.0, RES)
    return {
        "schema": 1, "name": "empty", "resolution": RES, "seed": seed,
        "map": rows_from_grid(grid),
        "objects": [], "targets": [], "tasks": [],
        "robot_start": [2.0, 2.0, 0.0], "user_start": [2.3, 1.7],
        "noise": dict(NOISELESS),
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    scenarios = [
        door_scenario("door-push", 1, seed=7),
        door_scenario("door-pull", -1, seed=8, height=5.0),
        elevator_scenario(seed=9),
        chair_scenario(seed=10),
        route_scenario(seed=12),
        empty_scenario(seed=1),
    ]
    for data in scenarios:
        path = OUT / f"{data['name'].replace('-', '_')}.json"
        path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {path} ({len(data['map'])} rows)")


if __name__ == "__main__":
    main()
