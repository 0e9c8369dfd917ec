from ._Evacuation import SENSING_RADIUS, EvacDecisionContext, evac_features
from ._Observations import (
    DECISION_WINDOW,
    EVACUATION,
    FIREWORK,
    BuildReport,
    build_evacuation_observations,
    build_firework_observations,
    build_observations,
    read_choice_log,
    read_trajectories,
)

__all__ = [
    "SENSING_RADIUS",
    "EvacDecisionContext",
    "evac_features",
    "DECISION_WINDOW",
    "EVACUATION",
    "FIREWORK",
    "BuildReport",
    "build_evacuation_observations",
    "build_firework_observations",
    "build_observations",
    "read_choice_log",
    "read_trajectories",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
