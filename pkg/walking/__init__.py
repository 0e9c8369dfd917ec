from ._Walking import (
    LOOKAHEAD,
    OPEN,
    AgentKinematics,
    WalkParams,
    acceleration,
    advance,
    headway,
    hold_at_stop,
    ordered_headways,
    step_kinematics,
    stop_hold,
    throughput_bound,
)

__all__ = [
    "LOOKAHEAD",
    "OPEN",
    "AgentKinematics",
    "WalkParams",
    "acceleration",
    "advance",
    "headway",
    "hold_at_stop",
    "ordered_headways",
    "step_kinematics",
    "stop_hold",
    "throughput_bound",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
