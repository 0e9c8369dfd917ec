import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from dcm import EVACUATION_FACTORS, FIREWORK_FACTORS, ChoiceModel, read_model
from Documents import attr, children, clock_origin, load_document, parse_time
from features import SENSING_RADIUS
from network import Network, NetworkError, NoPathError, read_network, route_links, shortest_distance
from walking import WalkParams

logger = logging.getLogger(__name__)

SCENARIO_LISTS = ("bin", "agent")
TIME_CAP_MARGIN = 4 * 3600.0


class ScenarioError(ValueError):
    """The scenario cannot be run as defined."""


class Mode(str, Enum):
    EVACUATION = "EVACUATION"
    FIREWORK = "FIREWORK"

    @classmethod
    def parse(cls, value) -> "Mode":
        try:
            return cls(str(value.value if isinstance(value, Enum) else value).strip().upper())
        except ValueError as e:
            raise ScenarioError(f"Unknown mode {value!r}") from e


class Policy(str, Enum):
    SP = "SP"
    FOLLOW = "FOLLOW"
    DCM = "DCM"

    @classmethod
    def parse(cls, value) -> "Policy":
        try:
            return cls(str(value.value if isinstance(value, Enum) else value).strip().upper())
        except ValueError as e:
            raise ScenarioError(f"Unknown policy {value!r}") from e


@dataclass(frozen=True)
class Departure:
    id: str
    time: float
    origin: str
    offset: float = 0.0


@dataclass(frozen=True)
class ScriptedAgent:
    """An agent that walks a fixed link sequence, exempt from the choice policy."""

    id: str
    time: float
    route: tuple[str, ...]
    offset: float = 0.0


@dataclass(frozen=True)
class AgentPlan:
    id: str
    time: float
    origin: str
    offset: float
    route: Optional[tuple[str, ...]]
    scripted: bool


def scale_schedule(counts: Sequence[float], target: int) -> np.ndarray:
    """Scale bin counts so they sum to ``target`` exactly (largest remainder).

    Leftover units go to the bins with the largest fractional parts, ties to
    the lower bin index.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or (counts < 0).any() or not np.isfinite(counts).all():
        raise ScenarioError("Bin counts must be a flat list of nonnegative numbers")
    if int(target) != target or target <= 0:
        raise ScenarioError("The target total must be a positive integer")
    total = counts.sum()
    if total == 0:
        raise ScenarioError("Cannot scale an all-zero schedule")
    exact = counts * (int(target) / total)
    scaled = np.floor(exact).astype(np.int64)
    short = int(target) - int(scaled.sum())
    order = np.lexsort((np.arange(counts.size), -(exact - scaled)))
    scaled[order[:short]] += 1
    return scaled


def bins_to_departures(
    starts: Sequence[float],
    width: float,
    counts: Sequence[int],
    origin: str,
    prefix: str = "a",
) -> list[Departure]:
    """Spread each bin's count evenly over [start, start + width)."""
    departures = []
    for start, count in zip(starts, counts):
        for k in range(int(count)):
            departures.append(Departure(f"{prefix}{len(departures)}", float(start) + width * k / int(count), origin))
    return departures


@dataclass
class Scenario:
    """Everything a run needs besides the seed.

    :param network: Walkable network, shared read-only between runs
    :param mode: EVACUATION (repeated decisions) or FIREWORK (one decision per junction)
    :param departures: Free agents in departure order
    :param policy: Route-choice policy for free agents
    :param model: Choice model for the DCM policy
    :param scripted: Agents with fixed routes
    :param time_cap: Absolute sim-time limit in s; defaults to schedule end + 4 h
    """

    network: Network
    mode: Mode
    departures: tuple[Departure, ...] = ()
    policy: Policy = Policy.SP
    model: Optional[ChoiceModel] = None
    scripted: tuple[ScriptedAgent, ...] = ()
    replications: int = 1
    base_seed: int = 0
    target_total: Optional[int] = None
    walk: WalkParams = field(default_factory=WalkParams)
    dt: float = 0.1
    decision_interval: float = 0.5
    sensing_radius: float = SENSING_RADIUS
    time_cap: Optional[float] = None
    schedule_end: Optional[float] = None
    name: str = "scenario"
    sources: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.mode = Mode.parse(self.mode)
        self.policy = Policy.parse(self.policy)
        self.departures = tuple(self.departures)
        self.scripted = tuple(self.scripted)
        self.validate()

    @property
    def factor_names(self) -> tuple[str, ...]:
        return EVACUATION_FACTORS if self.mode is Mode.EVACUATION else FIREWORK_FACTORS

    @property
    def factor_order(self) -> list[int]:
        """Columns of the canonical feature matrix in the model's factor order."""
        return [self.factor_names.index(name) for name in self.model.spec.factor_names]

    @property
    def decision_ticks(self) -> int:
        return max(1, int(round(self.decision_interval / self.dt)))

    @property
    def time_cap_s(self) -> float:
        if self.time_cap is not None:
            return self.time_cap
        times = [d.time for d in self.departures] + [s.time for s in self.scripted]
        end = max(times + ([self.schedule_end] if self.schedule_end is not None else []), default=0.0)
        return end + TIME_CAP_MARGIN

    def validate(self) -> None:
        network = self.network
        if not (self.dt > 0 and self.decision_interval > 0):
            raise ScenarioError("dt and decision_interval must be positive")
        if self.replications < 1:
            raise ScenarioError("replications must be at least 1")
        if self.base_seed < 0:
            raise ScenarioError("The base seed must be nonnegative")
        if not self.sensing_radius > 0:
            raise ScenarioError("sensing_radius must be positive")
        if network.destination is None:
            raise ScenarioError("The network has no destination")
        times = [d.time for d in self.departures]
        if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
            raise ScenarioError("Departure times must be nonnegative and sorted")
        if any(s.time < 0 for s in self.scripted):
            raise ScenarioError("Scripted departure times must be nonnegative")
        ids = [d.id for d in self.departures] + [s.id for s in self.scripted]
        if len(set(ids)) != len(ids):
            raise ScenarioError("Agent ids must be unique")

        step = self.walk.max_speed * self.dt
        short = [l.id for l in network.links.values() if l.length <= step]
        if short:
            raise ScenarioError(f"Links {short} are shorter than one step at max speed ({step} m)")
        for origin in sorted({d.origin for d in self.departures}):
            if origin in network.junctions:
                raise ScenarioError(f"Agents cannot spawn on junction {origin}")
            try:
                shortest_distance(network, origin, network.destination)
            except (NoPathError, ValueError) as e:
                raise ScenarioError(f"Agents spawning at {origin} cannot reach {network.destination}") from e
        for agent in self.scripted:
            self._check_route(agent)

        if self.policy is Policy.DCM:
            if self.model is None:
                raise ScenarioError("The DCM policy needs a choice model")
            if sorted(self.model.spec.factor_names) != sorted(self.factor_names):
                raise ScenarioError(
                    f"Model factors {self.model.spec.factor_names} do not match {self.mode.value} factors {self.factor_names}"
                )
            if list(self.model.spec.factor_names) != list(self.factor_names):
                logger.warning("Reordering model factors %s to %s", self.model.spec.factor_names, self.factor_names)
            for junction in network.junctions.values():
                if len(junction.alternatives) != self.model.spec.n_alternatives:
                    raise ScenarioError(f"Junction {junction.node} does not offer {self.model.spec.n_alternatives} alternatives")
        if self.mode is Mode.EVACUATION:
            if any(node.position is None for node in network.nodes.values()):
                raise ScenarioError("EVACUATION scenarios need coordinates on every node")
            for junction in network.junctions.values():
                for j in range(len(junction.alternatives)):
                    try:
                        network.start_point(junction, j)
                    except NetworkError as e:
                        raise ScenarioError(str(e)) from e

    def _check_route(self, agent: ScriptedAgent) -> None:
        links = self.network.links
        if not agent.route or any(l not in links for l in agent.route):
            raise ScenarioError(f"Scripted agent {agent.id} references unknown links")
        for a, b in zip(agent.route, agent.route[1:]):
            if links[a].target != links[b].source:
                raise ScenarioError(f"Scripted route of {agent.id} is not connected at {a} -> {b}")
        if links[agent.route[-1]].target != self.network.destination:
            raise ScenarioError(f"Scripted route of {agent.id} does not end at {self.network.destination}")

    def agents(self) -> list[AgentPlan]:
        """Free and scripted agents merged in departure order (stable on ties)."""
        plans = [AgentPlan(d.id, d.time, d.origin, d.offset, None, False) for d in self.departures]
        plans += [
            AgentPlan(s.id, s.time, self.network.links[s.route[0]].source, s.offset, s.route, True) for s in self.scripted
        ]
        return sorted(plans, key=lambda p: p.time)

    def with_policy(self, policy, model: Optional[ChoiceModel] = None) -> "Scenario":
        return replace(self, policy=Policy.parse(policy), model=model if model is not None else self.model)


def _scripted_route(network: Network, origin: str, alternative: str, junction: Optional[str]) -> tuple[str, ...]:
    candidates = [network.junctions[junction]] if junction else list(network.junctions.values())
    for candidate in candidates:
        if alternative in candidate.names:
            chosen = candidate.alternatives[candidate.names.index(alternative)]
            head = route_links(network, origin, candidate.node) if origin != candidate.node else []
            tail = route_links(network, network.links[chosen.link].target, network.destination)
            return tuple(head + [chosen.link] + tail)
    raise ScenarioError(f"No junction offers alternative {alternative}")


def _departures(element: dict, base: Path, network: Network, origin: float) -> tuple[list[Departure], Optional[float], Optional[int]]:
    default_origin = attr(element, "origin", network.origins[0] if network.origins else None)
    width = float(attr(element, "width", 300.0))
    target = attr(element, "target_total")
    target = int(target) if target is not None else None

    starts, counts = [], []
    if attr(element, "file") is not None:
        frame = pd.read_csv(base / attr(element, "file"))
        starts = [parse_time(v, origin) for v in frame["start"]]
        counts = frame["count"].tolist()
    for b in children(element, "bin"):
        starts.append(parse_time(attr(b, "start"), origin))
        counts.append(float(attr(b, "count")))

    departures = []
    schedule_end = None
    if starts:
        if default_origin is None:
            raise ScenarioError("Binned departures need an origin")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ScenarioError("Departure bins must be sorted by start time")
        if target is not None:
            counts = scale_schedule(counts, target)
        elif any(c != int(c) or c < 0 for c in counts):
            raise ScenarioError("Unscaled bin counts must be nonnegative integers")
        departures = bins_to_departures(starts, width, [int(c) for c in counts], default_origin)
        schedule_end = starts[-1] + width
    for a in children(element, "agent"):
        departures.append(
            Departure(
                str(attr(a, "id", f"a{len(departures)}")),
                parse_time(attr(a, "time"), origin),
                attr(a, "origin", default_origin),
                float(attr(a, "offset", 0.0)),
            )
        )
    return departures, schedule_end, target


def read_scenario(
    path: str | Path,
    network: Optional[Network] = None,
    model: Optional[ChoiceModel] = None,
    policy=None,
    replications: Optional[int] = None,
    seed: Optional[int] = None,
) -> Scenario:
    """Load a scenario file; file references are resolved next to it.

    Keyword arguments override what the file says.
    """
    path = Path(path)
    base = path.parent
    document = load_document(path, "scenario", SCENARIO_LISTS)
    origin = clock_origin(attr(document, "start_clock"))
    sources = [str(path)]
    if network is None:
        network_file = attr(document, "network")
        if network_file is None:
            raise ScenarioError(f"{path} names no network file")
        network = read_network(base / network_file, origin)
        sources.append(str(base / network_file))
    policy = Policy.parse(policy if policy is not None else attr(document, "policy", "SP"))
    if model is None and attr(document, "model") is not None:
        model = read_model(base / attr(document, "model"))
        sources.append(str(base / attr(document, "model")))

    departures, schedule_end, target = _departures(document.get("departures") or {}, base, network, origin)
    departures.sort(key=lambda d: d.time)

    scripted = []
    for a in children(document, "scripted", "agent"):
        if attr(a, "route") is not None:
            route = tuple(str(attr(a, "route")).split())
        else:
            start = attr(a, "origin", network.origins[0] if network.origins else None)
            route = _scripted_route(network, start, attr(a, "alternative"), attr(a, "junction"))
        scripted.append(ScriptedAgent(str(attr(a, "id")), parse_time(attr(a, "time"), origin), route, float(attr(a, "offset", 0.0))))

    walk_element = document.get("walk") or {}
    walk = WalkParams(**{k.lstrip("@"): float(v) for k, v in walk_element.items() if k.startswith("@")})
    time_cap = attr(document, "time_cap")
    scenario = Scenario(
        network=network,
        mode=attr(document, "mode", "FIREWORK"),
        departures=tuple(departures),
        policy=policy,
        model=model,
        scripted=tuple(scripted),
        replications=int(replications if replications is not None else attr(document, "replications", 1)),
        base_seed=int(seed if seed is not None else attr(document, "seed", 0)),
        target_total=target,
        walk=walk,
        dt=float(attr(document, "dt", 0.1)),
        decision_interval=float(attr(document, "decision_interval", 0.5)),
        sensing_radius=float(attr(document, "sensing_radius", SENSING_RADIUS)),
        time_cap=parse_time(time_cap, origin) if time_cap is not None else None,
        schedule_end=schedule_end,
        name=attr(document, "name", path.stem),
        sources=tuple(sources),
    )
    logger.info(
        "Loaded scenario %s: %s, %d agents (%d scripted), policy %s",
        scenario.name,
        scenario.mode.value,
        len(scenario.departures) + len(scenario.scripted),
        len(scenario.scripted),
        scenario.policy.value,
    )
    return scenario
