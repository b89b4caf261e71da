from .grouping import (
    ScaleGuardError,
    group_dedicated,
    group_scattered_exact,
    group_scattered_heuristic,
    grouping_objective,
    grouping_violations,
)
from .locating import SAParams, frequency_sequence, locate_frequency, locate_sa, sa_sequence, sorted_locations
from .strategies import StrategyId, group, locate, read_assignment, slot, write_assignment

__all__ = [
    "SAParams",
    "ScaleGuardError",
    "StrategyId",
    "frequency_sequence",
    "group",
    "group_dedicated",
    "group_scattered_exact",
    "group_scattered_heuristic",
    "grouping_objective",
    "grouping_violations",
    "locate",
    "locate_frequency",
    "locate_sa",
    "read_assignment",
    "sa_sequence",
    "slot",
    "sorted_locations",
    "write_assignment",
]
