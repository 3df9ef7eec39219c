"""Dual-mode guidance simulation: a leash robot that leads a user to
articulated objects (doors, elevators, chairs) and then adapts to their
movement while they operate the object."""

__version__ = "0.1.0"
