import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

PROCEED = "PROCEED"
STOP = "STOP"


class NetworkError(ValueError):
    """The network definition is inconsistent."""


class NoPathError(ValueError):
    """No walkable path connects the requested nodes."""


@dataclass(frozen=True)
class Node:
    id: str
    x: Optional[float] = None
    y: Optional[float] = None

    @property
    def position(self) -> Optional[np.ndarray]:
        if self.x is None or self.y is None:
            return None
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class Link:
    id: str
    source: str
    target: str
    length: float
    width: float
    lanes: int = 1


class Schedule:
    """Piecewise-constant value over time built from right-open [start, end) intervals.

    A query at a boundary returns the value of the interval that starts there.
    Times outside every interval return ``default``.
    """

    def __init__(self, intervals: Sequence[tuple[float, float, Any]] = (), default: Any = None) -> None:
        ordered = sorted(intervals, key=lambda i: (i[0], i[1]))
        for start, end, _ in ordered:
            if not end > start:
                raise NetworkError(f"Schedule interval [{start}, {end}) is empty")
        for (s0, e0, _), (s1, e1, _) in zip(ordered, ordered[1:]):
            if s1 < e0:
                raise NetworkError(f"Schedule intervals [{s0}, {e0}) and [{s1}, {e1}) overlap")
        self.intervals = tuple(ordered)
        self.default = default
        self._starts = [i[0] for i in ordered]

    def value_at(self, t: float) -> Any:
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0 and t < self.intervals[i][1]:
            return self.intervals[i][2]
        return self.default

    def change_times(self) -> list[float]:
        times = set()
        for start, end, _ in self.intervals:
            times.update((start, end))
        return sorted(times)

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class ControlPoint:
    """A paused point: agents crossing ``offset`` on ``link`` are held while the mode is STOP."""

    id: str
    link: str
    offset: float
    schedule: Schedule = field(default_factory=lambda: Schedule(default=PROCEED))

    def mode_at(self, t: float) -> str:
        return self.schedule.value_at(t)


@dataclass(frozen=True)
class JunctionAlternative:
    """One outgoing option at a junction.

    :param name: Alternative name (e.g. Route1)
    :param link: First link of the option
    :param distance: Remaining distance to the destination in meters; derived
        from the graph when None
    :param attraction: Schedule of the attraction flag (1 while stalls are open)
    :param start_point: 2D start point of the route for distance-to-route factors
    """

    name: str
    link: str
    distance: Optional[float] = None
    attraction: Schedule = field(default_factory=lambda: Schedule(default=0))
    start_point: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class Junction:
    node: str
    alternatives: tuple[JunctionAlternative, ...]
    guidance: Schedule = field(default_factory=lambda: Schedule(default=None))

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.alternatives]

    def guided_at(self, t: float) -> Optional[int]:
        return self.guidance.value_at(t)


@dataclass(frozen=True)
class Train:
    departure: float
    capacity: int


@dataclass(frozen=True)
class Station:
    node: str
    platform_capacity: float = math.inf
    timetable: tuple[Train, ...] = ()


class Network:
    """Directed link/node graph with junctions, paused points and an optional station.

    The network is immutable after construction and safe to share between runs.
    """

    def __init__(
        self,
        nodes: Sequence[Node],
        links: Sequence[Link],
        junctions: Sequence[Junction] = (),
        control_points: Sequence[ControlPoint] = (),
        station: Optional[Station] = None,
        origins: Sequence[str] = (),
        destination: Optional[str] = None,
        distance_unit: float = 1.0,
        name: str = "network",
    ) -> None:
        self.name = name
        self.nodes = {n.id: n for n in nodes}
        self.links = {l.id: l for l in links}
        self.junctions = {j.node: j for j in junctions}
        self.control_points = tuple(control_points)
        self.station = station
        self.origins = tuple(origins)
        self.destination = destination if destination is not None else (station.node if station else None)
        if not distance_unit > 0:
            raise NetworkError("distance_unit must be positive")
        self.distance_unit = float(distance_unit)

        self.graph = nx.DiGraph()
        for node in self.nodes.values():
            self.graph.add_node(node.id)
        for link in sorted(self.links.values(), key=lambda l: l.id):
            self.graph.add_edge(link.source, link.target, length=link.length, id=link.id)
        self.link_ids = sorted(self.links)
        self.link_index = {lid: i for i, lid in enumerate(self.link_ids)}
        self.validate()
        self._distance_cache: dict[tuple[str, str], float] = {}

    def validate(self) -> None:
        seen_pairs = {}
        for link in self.links.values():
            if link.source not in self.nodes or link.target not in self.nodes:
                raise NetworkError(f"Link {link.id} references an unknown node")
            if not (link.length > 0 and link.width > 0):
                raise NetworkError(f"Link {link.id} needs positive length and width")
            if link.lanes < 1:
                raise NetworkError(f"Link {link.id} needs at least one lane")
            if (link.source, link.target) in seen_pairs:
                raise NetworkError(f"Links {seen_pairs[(link.source, link.target)]} and {link.id} are parallel")
            seen_pairs[(link.source, link.target)] = link.id
        for junction in self.junctions.values():
            if junction.node not in self.nodes:
                raise NetworkError(f"Junction at unknown node {junction.node}")
            if len(junction.alternatives) < 2:
                raise NetworkError(f"Junction {junction.node} needs at least two alternatives")
            for alternative in junction.alternatives:
                link = self.links.get(alternative.link)
                if link is None or link.source != junction.node:
                    raise NetworkError(f"Alternative {alternative.name} at {junction.node} must leave the junction")
            for _, _, guided in junction.guidance.intervals:
                if not 0 <= guided < len(junction.alternatives):
                    raise NetworkError(f"Guidance at {junction.node} names alternative {guided}")
        for point in self.control_points:
            link = self.links.get(point.link)
            if link is None or not 0 <= point.offset <= link.length:
                raise NetworkError(f"Control point {point.id} is not on a link")
        if self.station is not None:
            if self.station.node not in self.nodes:
                raise NetworkError(f"Station at unknown node {self.station.node}")
            departures = [t.departure for t in self.station.timetable]
            if any(b <= a for a, b in zip(departures, departures[1:])):
                raise NetworkError("Train departures must be strictly increasing")
            if any(t.capacity <= 0 for t in self.station.timetable):
                raise NetworkError("Train capacities must be positive")
        if self.destination is not None:
            if self.destination not in self.nodes:
                raise NetworkError(f"Unknown destination {self.destination}")
            for origin in self.origins:
                if origin not in self.nodes or not nx.has_path(self.graph, origin, self.destination):
                    raise NetworkError(f"Origin {origin} cannot reach {self.destination}")

    def link_between(self, source: str, target: str) -> Link:
        return self.links[self.graph.edges[source, target]["id"]]

    def incoming(self, node: str) -> list[Link]:
        return [self.link_between(u, node) for u in sorted(self.graph.predecessors(node))]

    def alternative_distance(self, junction: Junction, index: int) -> float:
        """Remaining meters to the destination when taking alternative ``index``."""
        alternative = junction.alternatives[index]
        if alternative.distance is not None:
            return alternative.distance
        link = self.links[alternative.link]
        return link.length + shortest_distance(self, link.target, self.destination)

    def start_point(self, junction: Junction, index: int) -> np.ndarray:
        alternative = junction.alternatives[index]
        if alternative.start_point is not None:
            return np.asarray(alternative.start_point, dtype=np.float64)
        position = self.nodes[self.links[alternative.link].target].position
        if position is None:
            raise NetworkError(f"Alternative {alternative.name} has no start point or coordinates")
        return position


def shortest_distance(network: Network, source: str, target: str) -> float:
    """Length in meters of the shortest directed path (Dijkstra on link lengths)."""
    for node in (source, target):
        if node not in network.nodes:
            raise ValueError(f"Unknown node {node}")
    key = (source, target)
    cached = network._distance_cache.get(key)
    if cached is not None:
        return cached
    try:
        distance = float(nx.dijkstra_path_length(network.graph, source, target, weight="length"))
    except nx.NetworkXNoPath as e:
        raise NoPathError(f"No path from {source} to {target}") from e
    network._distance_cache[key] = distance
    return distance


def route_links(network: Network, source: str, target: str) -> list[str]:
    """Link ids along the shortest path from ``source`` to ``target``."""
    try:
        path = nx.dijkstra_path(network.graph, source, target, weight="length")
    except nx.NetworkXNoPath as e:
        raise NoPathError(f"No path from {source} to {target}") from e
    return [network.graph.edges[u, v]["id"] for u, v in zip(path, path[1:])]


def junction_features(
    network: Network,
    junction: Junction,
    agent: Any = None,
    time: float = 0.0,
    distance_unit: Optional[float] = None,
) -> np.ndarray:
    """J x 3 feature matrix (DIST, GUIDE, ATT) at a junction.

    DIST is measured from the junction node and expressed in ``distance_unit``
    meters. GUIDE and ATT depend only on the junction and ``time``; ``agent``
    is accepted for call-site symmetry with agent-dependent feature builders.
    """
    unit = distance_unit or network.distance_unit
    n = len(junction.alternatives)
    x = np.zeros((n, 3))
    guided = junction.guided_at(time)
    for j, alternative in enumerate(junction.alternatives):
        x[j, 0] = network.alternative_distance(junction, j) / unit
        x[j, 1] = 1.0 if guided == j else 0.0
        x[j, 2] = float(alternative.attraction.value_at(time) or 0)
    return x
