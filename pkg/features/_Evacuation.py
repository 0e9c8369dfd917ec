import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SENSING_RADIUS = 5.0


@dataclass
class EvacDecisionContext:
    """What a pedestrian perceives when choosing an exit route.

    :param position: Decision-maker position (2D, m)
    :param heading: Unit heading vector
    :param start_points: J x 2 start points of the routes
    :param previous: Alternative chosen at the previous decision, None at the first
    :param neighbors: (position, currently chosen alternative) of other pedestrians
    :param sensing_radius: Neighbors further than this are not counted
    :param distance_unit: Meters per DIST unit
    """

    position: np.ndarray
    heading: np.ndarray
    start_points: np.ndarray
    previous: Optional[int] = None
    neighbors: Sequence[tuple[np.ndarray, int]] = field(default_factory=list)
    sensing_radius: float = SENSING_RADIUS
    distance_unit: float = 1.0

    def __post_init__(self) -> None:
        if not self.sensing_radius > 0:
            raise ValueError("sensing_radius must be positive")
        self.position = np.asarray(self.position, dtype=np.float64)
        self.start_points = np.asarray(self.start_points, dtype=np.float64).reshape(-1, 2)
        heading = np.asarray(self.heading, dtype=np.float64)
        norm = np.linalg.norm(heading)
        self.heading = heading / norm if norm > 0 else heading


def evac_features(ctx: EvacDecisionContext) -> np.ndarray:
    """J x 4 matrix of (DIST, CH, NF, NB) for the evacuation utility."""
    n_alternatives = ctx.start_points.shape[0]
    x = np.zeros((n_alternatives, 4))
    x[:, 0] = np.linalg.norm(ctx.start_points - ctx.position, axis=1) / ctx.distance_unit
    if ctx.previous is not None:
        x[ctx.previous, 1] = 1.0
    for position, chosen in ctx.neighbors:
        if chosen is None or not 0 <= chosen < n_alternatives:
            continue
        relative = np.asarray(position, dtype=np.float64) - ctx.position
        if np.hypot(relative[0], relative[1]) > ctx.sensing_radius:
            continue
        if float(relative @ ctx.heading) > 0.0:
            x[chosen, 2] += 1.0
        else:
            x[chosen, 3] += 1.0
    return x
