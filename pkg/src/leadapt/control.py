"""Command and prompt value types shared by the two control modes."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import Pose2


@dataclass(frozen=True)
class ControlCommand:
    """Velocity plus an absolute heading setpoint.

    ``frame`` is "world" or "robot"; robot-frame commands (visual servoing
    knows only bearing and range) carry vx = forward speed and a heading
    setpoint relative to the current heading, and must be converted with
    ``to_world`` before actuation.
    """
    vx: float = 0.0
    vy: float = 0.0
    heading_cmd: float | None = None
    done: bool = False
    frame: str = "world"

    def to_world(self, pose: Pose2) -> "ControlCommand":
        if self.frame == "world":
            return self
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        heading = None if self.heading_cmd is None else pose.heading + self.heading_cmd
        return replace(self, vx=self.vx * c - self.vy * s, vy=self.vx * s + self.vy * c,
                       heading_cmd=heading, frame="world")

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


STOP = ControlCommand()


@dataclass(frozen=True)
class Prompt:
    text: str
    channel: str = "voice"


# Spoken when the robot gives up and parks; the user agent listens for it.
HELP_PROMPT = "assistance needed"


class ButtonDirection(Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    FORWARD = "forward"


@dataclass(frozen=True)
class ButtonEvent:
    direction: ButtonDirection
    tick: int = 0
