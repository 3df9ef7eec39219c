"""Parameter tables for every subsystem, with scenario-overridable defaults."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum


class Variant(Enum):
    FULL = "full"
    NON_ADAPTIVE = "noadapt"


@dataclass
class RobotGeometry:
    robot_radius: float = 0.35
    user_radius: float = 0.25
    # User stand point relative to the robot head: lateral on the announced
    # side, offset behind along -heading.
    lateral_offset: float = 0.5
    back_offset: float = 0.3
    arm_reach: float = 0.75
    leash_slack: float = 0.4
    leash_length: float = 1.3


@dataclass
class PlacementWeights:
    clearance_weight: float = 2.0   # w_c
    distance_weight: float = 1.0    # w_d, per meter
    motion_weight: float = 4.0      # w_m, swept-region overlap
    safe_clearance: float = 0.3     # shortfall below this is penalized
    candidate_radius: float = 2.0   # candidate cells within this of the target


@dataclass
class LeadParams:
    speed_cap: float = 0.6
    turn_rate_cap: float = 0.8
    lookahead: float = 0.4
    arrive_tol: float = 0.15
    dock_tol: float = 0.03          # orchestrator settles onto the exact stop pose
    bearing_tol: float = 0.05       # servo alignment threshold, rad
    band_near: float = 0.3
    band_far: float = 0.8
    servo_lost_limit: int = 10
    inflate_margin: float = 0.05


@dataclass
class ApfParams:
    attract_gain: float = 1.0       # scales attraction toward the user
    handle_gain: float = 0.8        # scales the forward-push handle vector
    repulse_gain: float = 0.15
    influence_radius: float = 1.0   # repulsion active below this distance
    max_speed: float = 0.5
    heading_blend: float = 0.6      # 0 = goal bearing only, 1 = handle only
    sector_deg: float = 30.0        # obstacle clustering sector width


@dataclass
class ClearanceGates:
    door_min_opening: float = 0.7
    elevator_min_fraction: float = 0.95
    chair_min_pull: float = 0.4


@dataclass
class NoiseParams:
    sigma_pos: float = 0.0          # target point noise, m per axis
    sigma_dim: float = 0.0          # width/height noise, m
    sigma_height: float = 0.0       # target height noise, m
    lambda_fp: float = 0.0          # Poisson mean of spurious candidates
    drop_prob: float = 0.0          # per-tick chance a true candidate is dropped
    conf_mu: float = 0.85
    conf_sigma: float = 0.1
    spurious_conf_lo: float = 0.3
    spurious_conf_hi: float = 0.95
    sensing_range: float = 6.0

    @classmethod
    def noiseless(cls) -> "NoiseParams":
        """Exact measurements, certain confidence, no spurious candidates."""
        return cls(conf_mu=1.0, conf_sigma=0.0)


@dataclass
class HandContactParams:
    planar_tol: float = 0.08
    height_tol: float = 0.15
    debounce_ticks: int = 2


@dataclass
class UserParams:
    walk_speed: float = 0.8
    hand_speed: float = 0.5
    reach: float = 0.75
    error_gain: float = 0.5         # couples robot misalignment/excess range to pointing error
    search_noise_sigma: float = 0.03
    base_search_time: float = 0.5   # reaction delay before the hand starts moving
    confirm_delay: float = 1.0
    door_rate: float = 0.9          # rad/s while opening
    chair_rate: float = 0.3         # m/s while pulling
    spiral_step: float = 0.05       # search radius gained per revolution
    fallback_help_delay: float = 2.0  # scripted "help arrives" forward press


@dataclass
class SessionConfig:
    variant: Variant = Variant.FULL
    nonadaptive_stop_distance: float = 1.2
    dt: float = 0.1
    timeout_s: float = 600.0
    prompt_seconds: float = 2.0     # playback span excluded from stage metrics
    detection_fail_limit: int = 50  # consecutive misses before fallback
    approach_distance: float = 2.5  # wayfinding leg target distance from object
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    weights: PlacementWeights = field(default_factory=PlacementWeights)
    lead: LeadParams = field(default_factory=LeadParams)
    apf: ApfParams = field(default_factory=ApfParams)
    gates: ClearanceGates = field(default_factory=ClearanceGates)
    noise: NoiseParams = field(default_factory=NoiseParams)
    hand: HandContactParams = field(default_factory=HandContactParams)
    user: UserParams = field(default_factory=UserParams)


def apply_overrides(cfg, overrides: dict):
    """Recursively apply a nested dict of overrides onto a config dataclass."""
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise KeyError(key)
        current = getattr(cfg, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            apply_overrides(current, value)
        elif key == "variant":
            setattr(cfg, key, Variant(value))
        else:
            setattr(cfg, key, type(current)(value) if current is not None else value)
    return cfg
