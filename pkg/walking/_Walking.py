import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

OPEN = math.inf
LOOKAHEAD = 10.0


@dataclass(frozen=True)
class WalkParams:
    """Parameters of the one-dimensional walking model (one global set per run).

    Args:
        desired_speed (float): Free-flow speed v0 in m/s.
        relaxation_time (float): Time tau in s to relax toward v0.
        repulsion_strength (float): A in m/s^2, braking at contact distance.
        repulsion_range (float): B in m, decay length of the braking term.
        body_radius (float): r in m; centers never come closer than 2r.
        max_speed (float): Speed cap in m/s.
    """

    desired_speed: float = 1.33
    relaxation_time: float = 0.5
    repulsion_strength: float = 2.0
    repulsion_range: float = 1.0
    body_radius: float = 0.25
    max_speed: float = 2.0

    def __post_init__(self) -> None:
        for name in ("desired_speed", "relaxation_time", "repulsion_strength", "repulsion_range", "body_radius", "max_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.desired_speed > self.max_speed:
            raise ValueError("desired_speed cannot exceed max_speed")

    @property
    def min_gap(self) -> float:
        return 2.0 * self.body_radius


@dataclass(frozen=True)
class AgentKinematics:
    link: str
    offset: float
    speed: float = 0.0


def headway(
    agent: AgentKinematics,
    link_length: float,
    occupants: Sequence[float],
    next_occupants: Sequence[float] = (),
    lookahead: float = LOOKAHEAD,
) -> float:
    """Distance to the nearest agent ahead along the route, or OPEN.

    :param agent: The follower
    :param link_length: Length of the follower's link
    :param occupants: Offsets of the other agents on the follower's link (lane)
    :param next_occupants: Offsets of agents on the next link of the route
    :param lookahead: Agents further ahead than this are ignored
    :return: Center-to-center distance in meters, or OPEN
    """
    ahead = [o - agent.offset for o in occupants if o > agent.offset]
    if ahead:
        gap = min(ahead)
    elif len(next_occupants):
        gap = link_length - agent.offset + min(next_occupants)
    else:
        return OPEN
    return gap if gap <= lookahead else OPEN


def ordered_headways(
    lane_keys: np.ndarray,
    offsets: np.ndarray,
    remaining: np.ndarray,
    entry_gaps: np.ndarray,
    lookahead: float = LOOKAHEAD,
) -> np.ndarray:
    """Headways of many agents at once.

    Input arrays are sorted by (lane, offset). The leader of an agent is the
    next entry of its lane; the front agent of a lane looks across the link end
    by ``remaining`` (meters left on its link) plus ``entry_gaps`` (offset of the
    rearmost agent it would follow on its next link, ``inf`` when none).
    """
    n = offsets.shape[0]
    gaps = np.empty(n)
    if n == 0:
        return gaps
    same_lane = np.zeros(n, dtype=bool)
    same_lane[:-1] = lane_keys[1:] == lane_keys[:-1]
    gaps[:-1] = offsets[1:] - offsets[:-1]
    front = ~same_lane
    gaps[front] = remaining[front] + entry_gaps[front]
    gaps[gaps > lookahead] = OPEN
    return gaps


def acceleration(speed: np.ndarray, gaps: np.ndarray, params: WalkParams) -> np.ndarray:
    """(v0 - v) / tau - A exp((2r - h) / B), the second term vanishing for OPEN headways."""
    drive = (params.desired_speed - speed) / params.relaxation_time
    finite = np.isfinite(gaps)
    repulsion = np.zeros_like(np.asarray(speed, dtype=np.float64))
    repulsion[finite] = params.repulsion_strength * np.exp((params.min_gap - gaps[finite]) / params.repulsion_range)
    return drive - repulsion


def advance(speed, gaps, params: WalkParams, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """New speeds and distances walked during ``dt``.

    The distance is capped at h - 2r so an agent never closes in on its leader
    below contact distance; a capped agent's speed becomes distance / dt.
    """
    speed = np.atleast_1d(np.asarray(speed, dtype=np.float64))
    gaps = np.atleast_1d(np.asarray(gaps, dtype=np.float64))
    new_speed = np.clip(speed + acceleration(speed, gaps, params) * dt, 0.0, params.max_speed)
    distance = new_speed * dt
    limit = np.where(np.isfinite(gaps), np.maximum(gaps - params.min_gap, 0.0), np.inf)
    capped = distance > limit
    distance = np.where(capped, limit, distance)
    new_speed = np.where(capped, distance / dt, new_speed)
    return new_speed, distance


def step_kinematics(agent: AgentKinematics, gap: float, params: WalkParams, dt: float = 0.1) -> AgentKinematics:
    """Advance one agent by ``dt``. The offset may pass the link end; the caller moves it on."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    new_speed, distance = advance(agent.speed, gap, params, dt)
    return replace(agent, offset=agent.offset + float(distance[0]), speed=float(new_speed[0]))


def hold_at_stop(
    old_offsets: np.ndarray,
    new_offsets: np.ndarray,
    speeds: np.ndarray,
    stop_offset: float,
    active: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clamp agents whose step would cross an active stop line.

    Returns (offsets, speeds, held) where ``held`` flags the agents standing at
    the line with speed 0.
    """
    held = (old_offsets <= stop_offset) & (new_offsets > stop_offset) if active else np.zeros(old_offsets.shape, dtype=bool)
    return np.where(held, stop_offset, new_offsets), np.where(held, 0.0, speeds), held


def stop_hold(before: AgentKinematics, after: AgentKinematics, stop_offset: float, active: bool = True) -> tuple[AgentKinematics, bool]:
    """Single-agent form of ``hold_at_stop``: returns the corrected state and whether it is held."""
    offsets, speeds, held = hold_at_stop(
        np.array([before.offset]), np.array([after.offset]), np.array([after.speed]), stop_offset, active
    )
    return replace(after, offset=float(offsets[0]), speed=float(speeds[0])), bool(held[0])


def throughput_bound(width: float, params: WalkParams) -> float:
    """Upper bound on sustained link outflow in persons/s: width * max_speed / (2r)^2."""
    return width * params.max_speed / params.min_gap**2
