import copy
import json
from pathlib import Path

import pytest

from leadapt.errors import ScenarioError
from leadapt.harness.scenario import (
    canonical_bytes,
    load_scenario,
    parse_scenario,
)

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src/leadapt/scenarios"


def minimal(**extra) -> dict:
    """A 2 m x 2 m empty room with valid start poses and no tasks."""
    data = {
        "schema": 1,
        "name": "unit",
        "map": ["." * 40] * 40,
        "robot_start": [1.0, 1.0, 0.0],
        "user_start": [1.0, 0.6],
    }
    data.update(extra)
    return data


def with_door(**extra) -> dict:
    data = minimal(
        map=["." * 80] * 80,
        robot_start=[2.0, 1.0, 0.0],
        user_start=[2.0, 0.5],
        objects=[{
            "id": "d1", "kind": "door",
            "footprint": [[1.0, 2.0], [1.9, 2.0], [1.9, 2.04], [1.0, 2.04]],
            "kinematics": {"type": "door", "hinge": [1.0, 2.0], "swing": 1,
                           "max_angle": 1.5707963267948966},
        }],
        targets=[{"owner": "d1", "point": [1.82, 2.02], "height": 1.0,
                  "normal": -1.5707963267948966, "kind": "handle"}],
        tasks=[{"object": "d1", "kind": "door"}],
    )
    data.update(extra)
    return data


def expect_error(data: dict, fragment: str):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert fragment in str(err.value)


# --- happy path ---------------------------------------------------------------


def test_minimal_parses():
    sc = parse_scenario(minimal())
    assert sc.name == "unit"
    assert sc.seed == 0
    assert sc.resolution == 0.05
    assert sc.tasks == []


def test_map_rows_read_top_down():
    # A '#' in the first row must land at the highest y, like a floor plan.
    rows = ["." * 40] * 40
    rows[0] = "#" * 40
    sc = parse_scenario(minimal(map=rows))
    world = sc.build_world()
    assert world.grid.static[-1].all()
    assert not world.grid.static[1, 1]


def test_outer_ring_always_walled():
    world = parse_scenario(minimal()).build_world()
    static = world.grid.static
    assert static[0].all() and static[-1].all()
    assert static[:, 0].all() and static[:, -1].all()


def test_build_world_gives_independent_copies():
    sc = parse_scenario(with_door())
    w1, w2 = sc.build_world(), sc.build_world()
    d = next(iter(w1.objects.values()))
    from leadapt.world import advance_object
    w1.replace_object(advance_object(d, 0.5))
    assert w2.objects["d1"].state == 0.0


def test_session_config_is_a_copy():
    sc = parse_scenario(minimal(config={"dt": 0.05}))
    cfg = sc.session_config()
    cfg.dt = 99.0
    assert sc.session_config().dt == 0.05


def test_noise_block_merges_into_config():
    sc = parse_scenario(minimal(noise={"sigma_pos": 0.1},
                                config={"noise": {"drop_prob": 0.2}}))
    assert sc.config.noise.sigma_pos == 0.1
    assert sc.config.noise.drop_prob == 0.2


def test_sha256_ignores_key_order():
    a = minimal()
    b = dict(reversed(list(a.items())))
    assert canonical_bytes(a) == canonical_bytes(b)
    assert parse_scenario(a).sha256 == parse_scenario(copy.deepcopy(b)).sha256


def test_shipped_fixtures_parse(tmp_path):
    names = sorted(p.name for p in FIXTURE_DIR.glob("*.json"))
    assert names, "no shipped scenario fixtures found"
    for name in names:
        sc = load_scenario(FIXTURE_DIR / name)
        sc.build_world()
        assert sc.rows


# --- validation errors carry field paths ---------------------------------------


def test_rejects_wrong_schema():
    expect_error(minimal(schema=2), "schema")


def test_rejects_missing_schema():
    data = minimal()
    del data["schema"]
    expect_error(data, "schema")


def test_rejects_bad_map_cell():
    rows = ["." * 40] * 40
    rows[3] = "." * 39 + "x"
    expect_error(minimal(map=rows), "map[3]")


def test_rejects_ragged_map():
    rows = ["." * 40] * 40
    rows[7] = "." * 39
    expect_error(minimal(map=rows), "map[7]")


def test_rejects_unknown_object_kind():
    data = with_door()
    data["objects"][0]["kind"] = "window"
    expect_error(data, "objects[0].kind")


def test_rejects_kinematics_kind_mismatch():
    data = with_door()
    data["objects"][0]["kinematics"] = {
        "type": "chair", "pull_axis": [0, -1], "max_pull": 0.5}
    expect_error(data, "objects[0].kinematics.type")


def test_rejects_duplicate_object_ids():
    data = with_door()
    data["objects"].append(copy.deepcopy(data["objects"][0]))
    expect_error(data, "duplicate object ids")


def test_rejects_target_with_unknown_owner():
    data = with_door()
    data["targets"][0]["owner"] = "ghost"
    expect_error(data, "targets[0].owner")


def test_rejects_task_without_target():
    data = with_door()
    data["targets"] = []
    expect_error(data, "tasks[0].object")


def test_rejects_task_kind_mismatch():
    data = with_door()
    data["tasks"][0]["kind"] = "elevator"
    expect_error(data, "tasks[0].kind")


def test_rejects_bad_swing():
    data = with_door()
    data["objects"][0]["kinematics"]["swing"] = 2
    expect_error(data, "swing")


def test_rejects_start_pose_in_wall():
    expect_error(minimal(robot_start=[0.02, 0.02, 0.0]), "robot_start")
    expect_error(minimal(user_start=[0.02, 1.0]), "user_start")


def test_rejects_unknown_config_key():
    expect_error(minimal(config={"warp_speed": 9}), "config")


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert "invalid JSON" in str(err.value)


def test_load_reports_missing_file(tmp_path):
    with pytest.raises(ScenarioError) as err:
        load_scenario(tmp_path / "absent.json")
    assert "cannot read" in str(err.value)


def test_load_uses_filename_as_default_name(tmp_path):
    data = minimal()
    del data["name"]
    p = tmp_path / "corridor.json"
    p.write_text(json.dumps(data), encoding="utf-8")
    assert load_scenario(p).name == "corridor"
