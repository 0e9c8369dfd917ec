import hashlib
import logging
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import pandas as pd

from dcm import choice_probabilities, sample_choice
from features import EvacDecisionContext, evac_features
from network import STOP, Junction, junction_features, route_links
from walking import advance, hold_at_stop, ordered_headways

from ._Audit import StepAuditor
from ._Scenario import Mode, Policy, Scenario

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["t_s", "agent", "event", "junction", "alternative", "probabilities", "train"]
SUMMARY_COLUMNS = ["id", "departure_s", "spawn_s", "state", "route", "decisions", "arrival_s", "train", "scripted"]
TIME_EPSILON = 1e-9

_PENDING, _WALKING, _HELD, _WAITING, _BOARDED, _EXITED = range(6)


class AgentState(str, Enum):
    PENDING = "PENDING"
    WALKING = "WALKING"
    HELD = "HELD"
    WAITING_AT_STATION = "WAITING_AT_STATION"
    BOARDED = "BOARDED"
    EXITED = "EXITED"


_STATES = list(AgentState)


class Event(str, Enum):
    SPAWN = "SPAWN"
    DECIDE = "DECIDE"
    HOLD = "HOLD"
    RELEASE = "RELEASE"
    ARRIVE_STATION = "ARRIVE_STATION"
    BOARD = "BOARD"
    EXIT = "EXIT"


class EventLog:
    """Append-only event records with non-decreasing timestamps."""

    def __init__(self) -> None:
        self._rows = []

    def append(
        self,
        t: float,
        agent: str,
        event: Event,
        junction: str = "",
        alternative: str = "",
        probabilities: str = "",
        train: int = -1,
    ) -> None:
        if self._rows and t < self._rows[-1][0] - TIME_EPSILON:
            raise ValueError(f"Event at t={t} precedes the last logged event")
        self._rows.append((t, agent, event.value, junction, alternative, probabilities, train))

    def __len__(self) -> int:
        return len(self._rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self._rows, columns=EVENT_COLUMNS)
        return frame.astype({"t_s": "float64", "agent": str, "train": "int64"})


@dataclass
class Agent:
    id: str
    departure: float
    spawn: Optional[float]
    state: AgentState
    route: tuple[str, ...]
    decisions: dict[str, str] = field(default_factory=dict)
    arrival: Optional[float] = None
    train: Optional[int] = None
    scripted: bool = False


@dataclass
class RunOutput:
    scenario: str
    mode: Mode
    policy: Policy
    seed: int
    events: pd.DataFrame
    agents: list[Agent]
    truncated: bool
    end_time: float
    elapsed_s: float = 0.0

    @property
    def summary(self) -> pd.DataFrame:
        rows = [
            (
                a.id,
                a.departure,
                math.nan if a.spawn is None else a.spawn,
                a.state.value,
                " ".join(a.route),
                ";".join(f"{k}:{v}" for k, v in a.decisions.items()),
                math.nan if a.arrival is None else a.arrival,
                -1 if a.train is None else a.train,
                a.scripted,
            )
            for a in self.agents
        ]
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def count(self, state: AgentState) -> int:
        return sum(1 for a in self.agents if a.state is state)


class _Simulation:
    """State of one run. Agents live in flat arrays indexed by departure order."""

    def __init__(self, scenario: Scenario, seed: int, audit: bool) -> None:
        self.scenario = scenario
        self.network = network = scenario.network
        self.params = scenario.walk
        self.dt = scenario.dt
        self.seed = seed
        self.log = EventLog()
        self.auditor = StepAuditor(self.params) if audit else None

        self.plans = scenario.agents()
        n = len(self.plans)
        self.ids = [p.id for p in self.plans]
        self.departure = np.array([p.time for p in self.plans], dtype=np.float64)
        self.scripted = np.array([p.scripted for p in self.plans], dtype=bool)
        self.state = np.full(n, _PENDING, dtype=np.int8)
        self.link = np.full(n, -1, dtype=np.int64)
        self.lane = np.zeros(n, dtype=np.int64)
        self.next_link = np.full(n, -1, dtype=np.int64)
        self.offset = np.zeros(n)
        self.speed = np.zeros(n)
        self.routes: list[list[int]] = [[] for _ in range(n)]
        self.route_pos = np.zeros(n, dtype=np.int64)
        self.spawn_time = np.full(n, np.nan)
        self.arrival = np.full(n, np.nan)
        self.train = np.full(n, -1, dtype=np.int64)
        self.choice = np.full(n, -1, dtype=np.int64)
        self.decisions: list[dict[str, int]] = [{} for _ in range(n)]
        self._rngs: dict[int, np.random.Generator] = {}

        self.link_ids = network.link_ids
        links = [network.links[l] for l in self.link_ids]
        self.lengths = np.array([l.length for l in links])
        self.lanes = np.array([l.lanes for l in links], dtype=np.int64)
        self.max_lanes = int(self.lanes.max())
        self.targets = [l.target for l in links]
        self._empty_rear = np.where(np.arange(self.max_lanes)[None, :] < self.lanes[:, None], np.inf, -np.inf)
        self.rear = self._empty_rear.copy()

        if scenario.mode is Mode.EVACUATION:
            self.source_xy = np.array([network.nodes[l.source].position for l in links])
            self.direction = np.array([network.nodes[l.target].position for l in links]) - self.source_xy
            self.heading = self.direction / np.linalg.norm(self.direction, axis=1)[:, None]
            self.start_points = {
                node: np.array([network.start_point(j, k) for k in range(len(j.alternatives))])
                for node, j in network.junctions.items()
            }

        self.control_points = [
            (network.link_index[c.link], c.offset, c) for c in sorted(network.control_points, key=lambda c: c.id)
        ]
        self.station = network.station
        self.trains = list(self.station.timetable) if self.station else []
        self.next_train = 0
        self.queue: deque[int] = deque()
        self.next_pending = 0
        self._paths: dict[str, list[int]] = {}
        self._tails: dict[tuple[str, int], list[int]] = {}
        self._shortest: dict[str, int] = {}
        self._scripted: dict[tuple[int, str], int] = {}

    def _rng(self, i: int) -> np.random.Generator:
        """Agent ``i``'s own stream, keyed by its id so other agents never shift its draws."""
        rng = self._rngs.get(i)
        if rng is None:
            key = int.from_bytes(hashlib.blake2b(self.ids[i].encode("utf-8"), digest_size=8).digest(), "little")
            rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence([self.seed, key])))
            self._rngs[i] = rng
        return rng

    def _path(self, node: str) -> list[int]:
        path = self._paths.get(node)
        if path is None:
            path = [self.network.link_index[l] for l in route_links(self.network, node, self.network.destination)]
            self._paths[node] = path
        return path

    def _tail(self, junction: Junction, j: int) -> list[int]:
        key = (junction.node, j)
        tail = self._tails.get(key)
        if tail is None:
            link = junction.alternatives[j].link
            tail = [self.network.link_index[link]] + self._path(self.network.links[link].target)
            self._tails[key] = tail
        return tail

    def _shortest_alternative(self, junction: Junction) -> int:
        j = self._shortest.get(junction.node)
        if j is None:
            distances = [self.network.alternative_distance(junction, k) for k in range(len(junction.alternatives))]
            j = int(np.argmin(distances))
            self._shortest[junction.node] = j
        return j

    def _scripted_alternative(self, i: int, junction: Junction) -> int:
        route = {self.link_ids[l] for l in self.routes[i]}
        for j, alternative in enumerate(junction.alternatives):
            if alternative.link in route:
                return j
        return -1

    def _policy_choice(self, i: int, junction: Junction, t: float, features: Callable[[], np.ndarray]) -> tuple[int, str]:
        policy = self.scenario.policy
        if policy is Policy.DCM:
            x = features()[:, self.scenario.factor_order]
            probabilities = choice_probabilities(self.scenario.model, x)
            j = sample_choice(self.scenario.model, x, self._rng(i))
            return j, ";".join(f"{p:.6f}" for p in probabilities)
        if policy is Policy.FOLLOW:
            guided = junction.guided_at(t)
            if guided is not None:
                return int(guided), ""
        return self._shortest_alternative(junction), ""

    def _positions(self, agents: np.ndarray) -> np.ndarray:
        links = self.link[agents]
        fraction = np.minimum(self.offset[agents] / self.lengths[links], 1.0)
        return self.source_xy[links] + fraction[:, None] * self.direction[links]

    def _alternative_at(self, n: int, node: str) -> int:
        """Agent ``n``'s alternative at junction ``node``: committed, scripted, or pending on the approach."""
        committed = self.decisions[n].get(node)
        if committed is not None:
            return committed
        if self.scripted[n]:
            key = (n, node)
            j = self._scripted.get(key)
            if j is None:
                j = self._scripted[key] = self._scripted_alternative(n, self.network.junctions[node])
            return j
        if self.link[n] >= 0 and self.targets[self.link[n]] == node:
            return int(self.choice[n])
        return -1

    def _evac_decide(self, deciders: list[tuple[int, str]], t: float) -> None:
        on = np.flatnonzero(self.link >= 0)
        positions = self._positions(on)
        where = {agent: k for k, agent in enumerate(on)}
        radius = self.scenario.sensing_radius
        made = []
        for i, node in deciders:
            junction = self.network.junctions[node]
            k = where[i]

            def features() -> np.ndarray:
                near = np.hypot(*(positions - positions[k]).T) <= radius
                near[k] = False
                neighbors = []
                for m in np.flatnonzero(near):
                    j = self._alternative_at(int(on[m]), node)
                    if j >= 0:
                        neighbors.append((positions[m], j))
                ctx = EvacDecisionContext(
                    positions[k],
                    self.heading[self.link[i]],
                    self.start_points[junction.node],
                    int(self.choice[i]) if self.choice[i] >= 0 else None,
                    neighbors,
                    radius,
                    self.network.distance_unit,
                )
                return evac_features(ctx)

            j, probabilities = self._policy_choice(i, junction, t, features)
            made.append((i, j))
            self.log.append(t, self.ids[i], Event.DECIDE, junction.node, junction.alternatives[j].name, probabilities)
        # every decider in a tick sees the choices held before it
        for i, j in made:
            self.choice[i] = j

    def _commit(self, i: int, node: str, t: float) -> None:
        """Settle the agent's alternative at junction ``node`` and rewrite its route tail.

        ``choice`` only ever holds the pending alternative for the junction
        being approached; it is cleared once the decision is stored.
        """
        junction = self.network.junctions[node]
        if self.scripted[i]:
            j = self._scripted_alternative(i, junction)
            if j < 0:
                return
            self.log.append(t, self.ids[i], Event.DECIDE, node, junction.alternatives[j].name, "scripted")
        else:
            if self.scenario.mode is Mode.EVACUATION:
                if self.choice[i] < 0:
                    self._evac_decide([(i, node)], t)
            else:
                j, probabilities = self._policy_choice(
                    i, junction, t, lambda: junction_features(self.network, junction, None, t)
                )
                self.choice[i] = j
                self.log.append(t, self.ids[i], Event.DECIDE, node, junction.alternatives[j].name, probabilities)
            j = int(self.choice[i])
            pos = int(self.route_pos[i])
            self.routes[i] = self.routes[i][: pos + 1] + self._tail(junction, j)
        self.decisions[i][node] = j
        self.choice[i] = -1
        self._refresh_next(i)

    def _refresh_next(self, i: int) -> None:
        pos = int(self.route_pos[i]) + 1
        self.next_link[i] = self.routes[i][pos] if pos < len(self.routes[i]) else -1

    def _best_lane(self, link: int) -> tuple[int, float]:
        lane = int(np.argmax(self.rear[link]))
        return lane, float(self.rear[link, lane])

    def _spawn(self, t: float) -> None:
        n = len(self.plans)
        while self.next_pending < n and self.departure[self.next_pending] <= t + TIME_EPSILON:
            i = self.next_pending
            plan = self.plans[i]
            if plan.route is not None:
                route = [self.network.link_index[l] for l in plan.route]
            else:
                route = list(self._path(plan.origin))
            first = route[0]
            lane, room = self._best_lane(first)
            if room - plan.offset < self.params.min_gap - TIME_EPSILON:
                break
            self.routes[i] = route
            self.route_pos[i] = 0
            self.link[i], self.lane[i], self.offset[i], self.speed[i] = first, lane, plan.offset, 0.0
            self.rear[first, lane] = plan.offset
            self.state[i] = _WALKING
            self.spawn_time[i] = t
            self.log.append(t, self.ids[i], Event.SPAWN)
            source = self.network.links[self.link_ids[first]].source
            if plan.scripted and source in self.network.junctions:
                self._commit(i, source, t)
            else:
                self._refresh_next(i)
            self.next_pending += 1

    def _board(self, t: float) -> None:
        while self.next_train < len(self.trains) and self.trains[self.next_train].departure <= t + TIME_EPSILON:
            train = self.trains[self.next_train]
            boarded = 0
            while self.queue and boarded < train.capacity:
                i = self.queue.popleft()
                self.state[i] = _BOARDED
                self.train[i] = self.next_train
                self.log.append(t, self.ids[i], Event.BOARD, train=self.next_train)
                boarded += 1
            logger.debug("Train %d at t=%.1f boarded %d, %d left waiting", self.next_train, t, boarded, len(self.queue))
            self.next_train += 1

    def _evac_tick(self, t: float) -> None:
        on = np.flatnonzero((self.link >= 0) & ~self.scripted)
        deciders = [
            (int(i), self.targets[self.link[i]])
            for i in on
            if self.targets[self.link[i]] in self.network.junctions and self.targets[self.link[i]] not in self.decisions[i]
        ]
        if deciders:
            self._evac_decide(deciders, t)

    def _station_full(self) -> bool:
        return len(self.queue) >= self.station.platform_capacity

    def _move(self, t: float, t_next: float) -> None:
        active = np.flatnonzero(self.link >= 0)
        if active.size == 0:
            return
        keys = self.link[active] * self.max_lanes + self.lane[active]
        order = np.lexsort((self.offset[active], keys))
        idx = active[order]
        keys = keys[order]
        links = self.link[idx]
        offsets = self.offset[idx]
        lengths = self.lengths[links]

        entry = np.full(idx.size, np.inf)
        nxt = self.next_link[idx]
        has_next = nxt >= 0
        entry[has_next] = self.rear[nxt[has_next]].max(axis=1)
        if self.station is not None and self._station_full():
            at_station = ~has_next & np.array([self.targets[l] == self.station.node for l in links])
            entry[at_station] = self.params.min_gap
        gaps = ordered_headways(keys, offsets, lengths - offsets, entry)
        speeds, distance = advance(self.speed[idx], gaps, self.params, self.dt)
        new_offsets = offsets + distance

        held = np.zeros(idx.size, dtype=bool)
        for link, stop, point in self.control_points:
            if point.mode_at(t) != STOP:
                continue
            on = links == link
            if not on.any():
                continue
            o, s, h = hold_at_stop(offsets[on], new_offsets[on], speeds[on], stop, True)
            h |= np.abs(offsets[on] - stop) < TIME_EPSILON
            new_offsets[on] = np.where(h, stop, o)
            speeds[on] = np.where(h, 0.0, s)
            held[on] |= h

        was_held = self.state[idx] == _HELD
        for k in np.flatnonzero(held & ~was_held):
            self.log.append(t_next, self.ids[idx[k]], Event.HOLD)
        for k in np.flatnonzero(was_held & ~held):
            self.log.append(t_next, self.ids[idx[k]], Event.RELEASE)
        self.state[idx] = np.where(held, _HELD, _WALKING)
        self.offset[idx] = new_offsets
        self.speed[idx] = speeds

        crossing = (new_offsets >= lengths) & ~held
        self.rear = self._empty_rear.copy()
        staying = ~crossing
        if staying.any():
            stay_keys = keys[staying]
            unique, first = np.unique(stay_keys, return_index=True)
            self.rear.flat[unique] = new_offsets[staying][first]
        c = np.flatnonzero(crossing)
        for k in c[np.lexsort((idx[c], -(new_offsets[c] - lengths[c])))]:
            self._cross(int(idx[k]), float(new_offsets[k] - lengths[k]), t_next)

        if self.auditor is not None:
            self.auditor.check(t_next, idx, keys, self.link, self.lane, self.offset, self.speed, self.max_lanes)

    def _block(self, i: int) -> None:
        link = self.link[i]
        self.offset[i] = self.lengths[link]
        self.speed[i] = 0.0
        lane = self.lane[i]
        self.rear[link, lane] = min(self.rear[link, lane], self.lengths[link])

    def _cross(self, i: int, overshoot: float, t: float) -> None:
        node = self.targets[self.link[i]]
        if node in self.network.junctions and node not in self.decisions[i]:
            self._commit(i, node, t)
        nxt = self.next_link[i]
        if nxt >= 0:
            lane, room = self._best_lane(nxt)
            offset = min(overshoot, room - self.params.min_gap)
            if offset < 0:
                self._block(i)
                return
            self.link[i], self.lane[i], self.offset[i] = nxt, lane, offset
            self.route_pos[i] += 1
            self.rear[nxt, lane] = offset
            self._refresh_next(i)
            return
        if self.station is not None and node == self.station.node:
            if self._station_full():
                self._block(i)
                return
            self.state[i] = _WAITING
            self.queue.append(i)
            event = Event.ARRIVE_STATION
        else:
            self.state[i] = _EXITED
            event = Event.EXIT
        self.link[i] = -1
        self.speed[i] = 0.0
        self.arrival[i] = t
        self.log.append(t, self.ids[i], event)

    def _finished(self) -> bool:
        return bool(np.isin(self.state, (_BOARDED, _EXITED)).all())

    def _next_step(self, step: int) -> Optional[int]:
        """The next step worth simulating, or None when nothing can change any more."""
        if (self.link >= 0).any():
            return step + 1
        upcoming = []
        if self.next_pending < len(self.plans):
            upcoming.append(self.departure[self.next_pending])
        if self.queue and self.next_train < len(self.trains):
            upcoming.append(self.trains[self.next_train].departure)
        if not upcoming:
            return None
        return max(step + 1, int(math.ceil(min(upcoming) / self.dt - TIME_EPSILON)))

    def run(self) -> RunOutput:
        scenario = self.scenario
        cap = scenario.time_cap_s
        ticks = scenario.decision_ticks
        evacuation = scenario.mode is Mode.EVACUATION
        started = time.perf_counter()
        step = 0
        truncated = False
        t = 0.0
        while True:
            t = step * self.dt
            if t > cap + TIME_EPSILON:
                truncated = True
                break
            self._spawn(t)
            self._board(t)
            if evacuation and step % ticks == 0:
                self._evac_tick(t)
            self._move(t, (step + 1) * self.dt)
            if self._finished():
                t = (step + 1) * self.dt
                break
            following = self._next_step(step)
            if following is None:
                truncated = True
                t = (step + 1) * self.dt
                break
            step = following
        if truncated:
            logger.warning("Run %s seed %d truncated at t=%.1f s", scenario.name, self.seed, t)
        return self._output(truncated, t, time.perf_counter() - started)

    def _output(self, truncated: bool, end_time: float, elapsed: float) -> RunOutput:
        agents = []
        for i, plan in enumerate(self.plans):
            decisions = {}
            for node, j in self.decisions[i].items():
                decisions[node] = self.network.junctions[node].alternatives[j].name
            agents.append(
                Agent(
                    id=plan.id,
                    departure=plan.time,
                    spawn=None if np.isnan(self.spawn_time[i]) else float(self.spawn_time[i]),
                    state=_STATES[self.state[i]],
                    route=tuple(self.link_ids[l] for l in self.routes[i]),
                    decisions=decisions,
                    arrival=None if np.isnan(self.arrival[i]) else float(self.arrival[i]),
                    train=None if self.train[i] < 0 else int(self.train[i]),
                    scripted=plan.scripted,
                )
            )
        output = RunOutput(
            scenario=self.scenario.name,
            mode=self.scenario.mode,
            policy=self.scenario.policy,
            seed=self.seed,
            events=self.log.to_frame(),
            agents=agents,
            truncated=truncated,
            end_time=end_time,
            elapsed_s=elapsed,
        )
        logger.info(
            "Run %s seed %d: %d spawned, %d boarded, %d exited, %d waiting, truncated=%s, %.1f s",
            output.scenario,
            self.seed,
            int(np.isfinite(self.spawn_time).sum()),
            output.count(AgentState.BOARDED),
            output.count(AgentState.EXITED),
            output.count(AgentState.WAITING_AT_STATION),
            truncated,
            elapsed,
        )
        return output


def run(scenario: Scenario, seed: Optional[int] = None, audit: bool = False) -> RunOutput:
    """Simulate one replication.

    :param scenario: A validated scenario
    :param seed: Replication seed, defaults to the scenario's base seed
    :param audit: Check headway, ordering and speed invariants at every step
    :return: Event log, per-agent records and the TRUNCATED flag
    """
    return _Simulation(scenario, scenario.base_seed if seed is None else int(seed), audit).run()


def _replication(scenario: Scenario, seed: int, audit: bool) -> RunOutput:
    output = run(scenario, seed, audit)
    logger.info("Replication seed %d finished (%d events, %.1f s)", seed, len(output.events), output.elapsed_s)
    return output


def replicate(scenario: Scenario, workers: int = 1, audit: bool = False) -> list[RunOutput]:
    """Run ``scenario.replications`` runs with seeds base_seed + i, in replication order.

    With ``workers`` > 1 the runs are spread over that many processes; each
    run depends only on its seed, so the outputs match a serial call.
    """
    seeds = [scenario.base_seed + i for i in range(scenario.replications)]
    if workers <= 1 or len(seeds) == 1:
        return [_replication(scenario, seed, audit) for seed in seeds]
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as executor:
        futures = [executor.submit(_replication, scenario, seed, audit) for seed in seeds]
        return [f.result() for f in futures]
