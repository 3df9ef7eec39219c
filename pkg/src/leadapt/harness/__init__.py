"""Scenario I/O, the episode loop, metrics, comparison runs, CLI, and the
session service."""
from .compare import CompareReport, compare_modes
from .episode import EpisodeLog, run_episode
from .metrics import Metrics, TaskMetrics, compute_metrics
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "CompareReport",
    "EpisodeLog",
    "Metrics",
    "Scenario",
    "TaskMetrics",
    "compare_modes",
    "compute_metrics",
    "load_scenario",
    "parse_scenario",
    "run_episode",
]
