"""Exception types raised by the simulation modules."""


class LeadaptError(Exception):
    """Base class for all library errors."""


class OutOfBounds(LeadaptError):
    """A queried pose lies outside the map."""


class DegenerateSurface(LeadaptError):
    """Target surface too small to estimate a normal from."""


class Unreachable(LeadaptError):
    """No feasible stop-goal candidate exists."""


class NoEndGoal(LeadaptError):
    """The designated end-goal region is fully occupied."""


class PathBlocked(LeadaptError):
    """No collision-free grid path between start and goal."""


class GoalOccupied(LeadaptError):
    """The requested plan goal is inside an (inflated) obstacle."""


class ServoLost(LeadaptError):
    """Target detection lost for too many consecutive servo ticks."""


class ObstaclePenetration(LeadaptError):
    """An obstacle distance fed to the potential field was non-positive."""


class MalformedLog(LeadaptError):
    """Episode log is missing required stage markers or header fields."""


class ScenarioError(LeadaptError):
    """Scenario file failed validation; message carries the field path."""
