import math

import pytest

from leadapt.adapt import CLEAR_PROMPTS, PitchState
from leadapt.config import HandContactParams, RobotGeometry, UserParams, Variant
from leadapt.control import ButtonDirection, Prompt
from leadapt.geometry import Pose2
from leadapt.human import (
    Manipulation,
    UserAgent,
    UserPhase,
    UserState,
    stuck_detector,
)
from leadapt.perception import HandContactDetector, TargetEstimate
from leadapt.placement import Side, user_stand_point
from leadapt.rng import Stream
from leadapt.world import (
    DoorKinematics,
    ElevatorKinematics,
    GridMap,
    InteractionTarget,
    MainObject,
    ObjectKind,
    TargetKind,
    World,
    advance_object,
    current_target_point,
)

DT = 0.1
GEOM = RobotGeometry()


def door_world():
    grid = GridMap.empty(8.0, 8.0)
    door = MainObject(
        id="d", kind=ObjectKind.DOOR,
        footprint=((4.0, 3.98), (4.9, 3.98), (4.9, 4.02), (4.0, 4.02)),
        state=0.0,
        kinematics=DoorKinematics(hinge=(4.0, 4.0), swing=1, max_angle=math.pi / 2))
    tgt = InteractionTarget(owner="d", point=(4.82, 4.0), height=1.0,
                            normal=-math.pi / 2, kind=TargetKind.HANDLE)
    return World(grid, objects=[door], targets=[tgt]), door, tgt


def elevator_world():
    grid = GridMap.empty(8.0, 8.0)
    elev = MainObject(
        id="e", kind=ObjectKind.ELEVATOR,
        footprint=((6.0, 3.5), (6.0, 4.5)),
        state=0.0,
        kinematics=ElevatorKinematics(gap_a=(6.0, 3.5), gap_b=(6.0, 4.5),
                                      panel_thickness=0.08,
                                      cabin=(6.04, 3.3, 7.4, 4.7),
                                      open_delay=1.0, open_duration=2.0))
    tgt = InteractionTarget(owner="e", point=(6.0, 3.2), height=1.1,
                            normal=math.pi, kind=TargetKind.CALL_BUTTON)
    return World(grid, objects=[elev], targets=[tgt]), elev, tgt


def make_agent(world, pos, seed=1, variant=Variant.FULL, **param_kw):
    agent = UserAgent(pos, params=UserParams(**param_kw), geometry=GEOM,
                      rng=Stream(seed, "user"), variant=variant)
    return agent


def height_prompt(h):
    return Prompt(text=f"target at height {h:.2f} meters")


def test_idle_holds_position():
    w, door, _ = door_world()
    robot = Pose2(2.0, 2.0, 0.0)
    agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM))
    agent.set_task("d")
    before = agent.state
    for tick in range(20):
        res = agent.step(w, robot, [], "lead", tick, DT)
    assert res.state.pos == before.pos
    assert res.state.hand == before.hand
    assert res.state.phase is UserPhase.FOLLOWING
    assert res.handle.pitch_state is PitchState.NEUTRAL


def test_following_tracks_moving_robot():
    w, door, _ = door_world()
    robot = Pose2(2.0, 2.0, 0.0)
    agent = make_agent(w, (1.0, 1.0))
    agent.set_task("d")
    for tick in range(100):
        robot = Pose2(2.0 + 0.03 * tick, 2.0, 0.0)
        res = agent.step(w, robot, [], "lead", tick, DT)
        step = math.dist(res.state.pos, agent.state.pos)
        assert step <= UserParams().walk_speed * DT + 1e-9
    stand = user_stand_point(robot, Side.RIGHT, GEOM)
    assert math.dist(res.state.pos, stand) < 0.15


def test_side_prompt_obeyed_exactly():
    w, door, _ = door_world()
    robot = Pose2(4.3, 3.0, math.pi / 2)
    agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM))
    agent.set_task("d")
    prompts = [Prompt(text="please stand on the left side of the robot"),
               height_prompt(1.0)]
    agent.step(w, robot, prompts, "lead", 0, DT)
    assert agent.state.side is Side.LEFT
    # Walks over to the left stand point before the hand goes out.
    stand = user_stand_point(robot, Side.LEFT, GEOM)
    for tick in range(1, 60):
        res = agent.step(w, robot, [], "lead", tick, DT)
        if math.dist(res.state.pos, stand) <= 0.08:
            break
    assert math.dist(res.state.pos, stand) <= 0.08


def test_nonadaptive_side_is_seeded_coin_flip():
    w, door, _ = door_world()
    robot = Pose2(4.3, 3.0, math.pi / 2)
    sides = []
    for seed in range(100):
        agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM),
                           seed=seed, variant=Variant.NON_ADAPTIVE)
        agent.set_task("d")
        agent.step(w, robot, [height_prompt(1.0)], "lead", 0, DT)
        sides.append(agent.state.side)
    lefts = sum(1 for s in sides if s is Side.LEFT)
    assert 30 <= lefts <= 70
    # Deterministic per seed.
    again = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM), seed=0,
                       variant=Variant.NON_ADAPTIVE)
    again.set_task("d")
    again.step(w, robot, [height_prompt(1.0)], "lead", 0, DT)
    assert again.state.side is sides[0]


def run_search(agent, w, robot, detector, target_point, target_height,
               max_ticks=3000):
    """Drive the agent from the height prompt until hand contact fires."""
    prompts = [height_prompt(target_height)]
    estimate = TargetEstimate(center=target_point, height=target_height,
                              normal=0.0)
    for tick in range(max_ticks):
        res = agent.step(w, robot, prompts, "lead", tick, DT)
        prompts = []
        if detector.update(res.state.hand, estimate):
            return tick
    raise AssertionError("search never found the target")


def test_hand_count_matches_kinematic_oracle():
    # Zero pointing error, hand starting 0.4 m out: contact fires once the
    # debounce is satisfied inside the planar tolerance.
    w, door, tgt = door_world()
    robot = Pose2(tgt.point[0] - 0.6, tgt.point[1], 0.0)   # aligned, in band
    agent = make_agent(w, (tgt.point[0] - 0.4, tgt.point[1] - 0.4),
                       base_search_time=0.0, search_noise_sigma=0.0)
    agent.set_task("d")
    # Mid-search, hand already posted 0.4 m from the (exactly known) target.
    agent._phase = UserPhase.SEARCHING
    agent._believed = (tgt.point[0], tgt.point[1], tgt.height)
    agent._reached_stand = True
    agent._hand = (tgt.point[0] - 0.4, tgt.point[1], tgt.height)
    params = UserParams()
    contact = HandContactParams()
    # Independent count: the gap closes at hand_speed*dt per tick; the
    # detector fires after debounce_ticks consecutive in-tolerance samples.
    gap, in_tol, oracle = 0.4, 0, None
    for k in range(1, 100):
        gap = max(0.0, gap - params.hand_speed * DT)
        in_tol = in_tol + 1 if gap <= contact.planar_tol else 0
        if in_tol >= contact.debounce_ticks:
            oracle = k
            break
    detector = HandContactDetector()
    estimate = TargetEstimate(center=tgt.point, height=tgt.height, normal=0.0)
    fired = None
    for tick in range(100):
        res = agent.step(w, robot, [], "lead", tick, DT)
        if detector.update(res.state.hand, estimate):
            fired = tick
            break
    assert fired is not None
    assert fired + 1 == oracle             # tick index vs. 1-based count


def mean_search_ticks(robot, n_seeds=50):
    total = 0
    for seed in range(n_seeds):
        w, door, tgt = door_world()
        agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM),
                           seed=seed, base_search_time=0.0)
        agent.set_task("d")
        agent._side = Side.RIGHT
        detector = HandContactDetector()
        total += run_search(agent, w, robot, detector, tgt.point, tgt.height)
    return total / n_seeds


def test_search_time_grows_with_stop_error():
    w, door, tgt = door_world()
    tx, ty = tgt.point
    near = Pose2(tx, ty - 0.5, math.pi / 2)                  # 0.5 m, aligned
    far = Pose2(tx, ty - 1.2, math.pi / 2 + 0.2)             # 1.2 m, misaligned
    assert mean_search_ticks(near) < mean_search_ticks(far)


def test_search_respects_reach_every_tick():
    w, door, tgt = door_world()
    robot = Pose2(tgt.point[0], tgt.point[1] - 1.2, math.pi / 2 + 0.3)
    agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM), seed=9,
                       base_search_time=0.0)
    agent.set_task("d")
    detector = HandContactDetector()
    prompts = [height_prompt(tgt.height)]
    estimate = TargetEstimate(center=tgt.point, height=tgt.height, normal=0.0)
    for tick in range(3000):
        res = agent.step(w, robot, prompts, "lead", tick, DT)
        prompts = []
        hx, hy, hh = res.state.hand
        px, py = res.state.pos
        assert math.hypot(hx - px, hy - py) <= UserParams().reach + 1e-9
        if detector.update(res.state.hand, estimate):
            return
    raise AssertionError("never fired")


def test_door_manipulation_rigid_grip_and_rate():
    w, door, tgt = door_world()
    robot = Pose2(4.45, 3.4, math.pi / 2)
    agent = make_agent(w, (4.82, 3.6))
    agent.set_task("d")
    agent._phase = UserPhase.SEARCHING       # as if mid-search when hand lands
    rate = UserParams().door_rate
    for tick in range(15):                  # stays below the max-angle clamp
        res = agent.step(w, robot, [], "adaptation", tick, DT)
        assert res.state.phase is UserPhase.MANIPULATING
        assert res.state.grasped == "d"
        assert res.handle.pitch_state is PitchState.PUSHED
        assert res.manipulation == Manipulation("d", dstate=pytest.approx(rate * DT))
        w.replace_object(advance_object(w.objects["d"], res.manipulation.dstate))
        assert res.state.hand[2] == tgt.height
    assert w.objects["d"].state == pytest.approx(15 * rate * DT)


def test_door_hand_tracks_moving_handle():
    w, door, tgt = door_world()
    robot = Pose2(4.45, 3.4, math.pi / 2)
    agent = make_agent(w, (4.82, 3.6))
    agent.set_task("d")
    agent._phase = UserPhase.SEARCHING
    for tick in range(60):
        handle_before = current_target_point(w.objects["d"], tgt)
        res = agent.step(w, robot, [], "adaptation", tick, DT)
        hx, hy, _ = res.state.hand
        assert math.hypot(hx - handle_before[0], hy - handle_before[1]) <= 0.02
        if res.manipulation and res.manipulation.dstate:
            w.replace_object(advance_object(w.objects["d"],
                                            res.manipulation.dstate))


def test_elevator_press_is_one_shot():
    w, elev, tgt = elevator_world()
    robot = Pose2(5.2, 3.2, 0.0)
    agent = make_agent(w, (5.5, 3.2))
    agent.set_task("e")
    agent._phase = UserPhase.SEARCHING
    res = agent.step(w, robot, [], "adaptation", 0, DT)
    assert res.manipulation == Manipulation("e", activate=True)
    from dataclasses import replace as dc_replace
    w.replace_object(dc_replace(w.objects["e"], activated_at_s=0.0))
    for tick in range(1, 10):
        res = agent.step(w, robot, [], "adaptation", tick, DT)
        assert res.manipulation is None


def test_confirm_after_clear_prompt():
    w, door, tgt = door_world()
    robot = Pose2(4.45, 3.4, math.pi / 2)
    agent = make_agent(w, (4.82, 3.6))
    agent.set_task("d")
    agent._phase = UserPhase.SEARCHING
    agent.step(w, robot, [], "adaptation", 0, DT)
    clear = Prompt(text=CLEAR_PROMPTS[ObjectKind.DOOR])
    res = agent.step(w, robot, [clear], "adaptation", 1, DT)
    assert res.state.phase is UserPhase.CONFIRMING
    presses = []
    for tick in range(2, 2 + 15):
        res = agent.step(w, robot, [], "adaptation", tick, DT)
        presses.extend(res.buttons)
    assert len(presses) == 1
    assert presses[0].direction is ButtonDirection.FORWARD
    # confirm_delay 1.0 s at dt 0.1 = 10 ticks after the prompt.
    assert presses[0].tick == 11


def test_nonadaptive_ignores_clear_keeps_manipulating():
    w, door, tgt = door_world()
    robot = Pose2(4.45, 3.4, math.pi / 2)
    agent = make_agent(w, (4.82, 3.6), variant=Variant.NON_ADAPTIVE)
    agent.set_task("d")
    agent._phase = UserPhase.SEARCHING
    agent.step(w, robot, [], "adaptation", 0, DT)
    clear = Prompt(text=CLEAR_PROMPTS[ObjectKind.DOOR])
    res = agent.step(w, robot, [clear], "adaptation", 1, DT)
    assert res.state.phase is UserPhase.MANIPULATING
    assert res.buttons == ()
    # The baseline resumes lead by itself; the agent just falls back in line.
    res = agent.step(w, robot, [], "lead", 2, DT)
    assert res.state.phase is UserPhase.FOLLOWING
    assert res.state.grasped is None


def test_fallback_help_press():
    w, door, tgt = door_world()
    robot = Pose2(2.0, 2.0, 0.0)
    agent = make_agent(w, (1.5, 1.5))
    agent.set_task("d")
    res = agent.step(w, robot, [Prompt(text="assistance needed")], "fallback", 0, DT)
    assert res.buttons == ()
    pressed_at = None
    for tick in range(1, 40):
        res = agent.step(w, robot, [], "fallback", tick, DT)
        if res.buttons:
            pressed_at = tick
            break
    assert pressed_at == int(round(UserParams().fallback_help_delay / DT))
    assert res.buttons[0].direction is ButtonDirection.FORWARD


def test_agent_never_walks_into_walls():
    grid = GridMap.empty(6.0, 6.0)
    grid.fill_rect(2.9, 0.0, 3.1, 6.0)
    door = MainObject(
        id="d", kind=ObjectKind.DOOR,
        footprint=((0.4, 0.38), (0.9, 0.38), (0.9, 0.42), (0.4, 0.42)),
        state=0.0,
        kinematics=DoorKinematics(hinge=(0.4, 0.4), swing=1, max_angle=math.pi / 2))
    w = World(grid, objects=[door],
              targets=[InteractionTarget("d", (0.82, 0.4), 1.0, -math.pi / 2,
                                         TargetKind.HANDLE)])
    robot = Pose2(5.0, 3.0, 0.0)    # other side of the wall
    agent = make_agent(w, (1.5, 3.0))
    agent.set_task("d")
    for tick in range(200):
        res = agent.step(w, robot, [], "lead", tick, DT)
        assert w.clearance(res.state.pos) >= GEOM.user_radius - 1e-9


def test_assist_reseeds_belief_to_truth():
    w, door, tgt = door_world()
    robot = Pose2(tgt.point[0], tgt.point[1] - 1.2, math.pi / 2 + 0.3)
    agent = make_agent(w, user_stand_point(robot, Side.RIGHT, GEOM), seed=3,
                       base_search_time=0.0)
    agent.set_task("d")
    agent.step(w, robot, [height_prompt(tgt.height)], "lead", 0, DT)
    assert agent._believed is not None
    assert math.dist(agent._believed[:2], tgt.point) > 0.05
    agent.assist(w)
    assert agent._believed[:2] == pytest.approx(tgt.point)
    # After the assist the hand walks straight onto the true target.
    detector = HandContactDetector()
    fired = run_search(agent, w, robot, detector, tgt.point, tgt.height,
                       max_ticks=600)
    assert fired < 600


def make_state(pos, hand):
    return UserState(pos=pos, hand=hand, side=None, grasped=None,
                     phase=UserPhase.SEARCHING)


def test_stuck_detector_static():
    hist = [make_state((1.0, 1.0), (1.0, 1.0, 0.9))] * 52
    assert stuck_detector(hist, DT)


def test_stuck_detector_needs_full_window():
    hist = [make_state((1.0, 1.0), (1.0, 1.0, 0.9))] * 49
    assert not stuck_detector(hist, DT)


def test_stuck_detector_oscillation_not_stuck():
    hist = [make_state((1.0 + 0.1 * (k % 2), 1.0), (1.0, 1.0, 0.9))
            for k in range(60)]
    assert not stuck_detector(hist, DT)


def test_stuck_detector_walking_not_stuck():
    hist = [make_state((1.0 + 0.02 * k, 1.0), (1.0 + 0.02 * k, 1.0, 0.9))
            for k in range(60)]
    assert not stuck_detector(hist, DT)


def test_stuck_detector_hand_motion_counts():
    # Body parked but the hand sweeping: not stuck.
    hist = [make_state((1.0, 1.0), (1.0 + 0.03 * k, 1.0, 0.9))
            for k in range(60)]
    assert not stuck_detector(hist, DT)
