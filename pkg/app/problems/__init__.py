"""
Problem definitions, presets and the time-rescaling utility.
"""

from app.problems.models import AnyProblem, SpaceTimeProblem, StationaryProblem, as_stationary
from app.problems.presets import PRESETS, available_presets, get_preset
from app.problems.rescale import rescale_nodes, time_rescale

__all__ = [
    "AnyProblem",
    "SpaceTimeProblem",
    "StationaryProblem",
    "as_stationary",
    "PRESETS",
    "available_presets",
    "get_preset",
    "rescale_nodes",
    "time_rescale",
]
