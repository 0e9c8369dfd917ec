import logging
from collections import Counter, deque
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from walking import WalkParams

from ._Scenario import Mode

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9


class AuditError(AssertionError):
    """A safety invariant was violated during a run."""


class StepAuditor:
    """Per-step checks: in-lane headway >= 2r, no overtaking, speed bounds."""

    def __init__(self, params: WalkParams, tolerance: float = TOLERANCE) -> None:
        self.min_gap = params.min_gap
        self.max_speed = params.max_speed
        self.tolerance = tolerance
        self.checked_steps = 0

    def check(
        self,
        t: float,
        order_before: np.ndarray,
        keys_before: np.ndarray,
        link: np.ndarray,
        lane: np.ndarray,
        offset: np.ndarray,
        speed: np.ndarray,
        max_lanes: int,
    ) -> None:
        """Compare the state after a step with the (lane, offset) order before it.

        :param order_before: Agent indices sorted by (lane key, offset) before the step
        :param keys_before: Lane keys of ``order_before``
        """
        floor = self.min_gap - self.tolerance
        if order_before.size > 1:
            after = np.where(link[order_before] >= 0, link[order_before] * max_lanes + lane[order_before], -1)
            stayed = after == keys_before
            pairs = stayed[:-1] & stayed[1:] & (keys_before[1:] == keys_before[:-1])
            gaps = offset[order_before[1:]] - offset[order_before[:-1]]
            bad = np.flatnonzero(pairs & (gaps < floor))
            if bad.size:
                k = bad[0]
                raise AuditError(
                    f"t={t:.1f}: agent {order_before[k]} came within {gaps[k]:.4f} m of agent {order_before[k + 1]}"
                )

        on = np.flatnonzero(link >= 0)
        if on.size:
            keys = link[on] * max_lanes + lane[on]
            order = np.lexsort((offset[on], keys))
            same = keys[order][1:] == keys[order][:-1]
            close = np.flatnonzero(same & (np.diff(offset[on][order]) < floor))
            if close.size:
                raise AuditError(f"t={t:.1f}: headway below {self.min_gap} m behind agent {on[order][close[0] + 1]}")
            s = speed[on]
            if ((s < -self.tolerance) | (s > self.max_speed + self.tolerance)).any():
                raise AuditError(f"t={t:.1f}: speed outside [0, {self.max_speed}]")
        self.checked_steps += 1


def audit_log(
    events: pd.DataFrame,
    mode: Optional[Mode | str] = None,
    capacities: Optional[Sequence[int]] = None,
) -> list[str]:
    """Check an event log for the run invariants and return the violations found.

    Checked: non-decreasing timestamps, conservation (every arrival, exit and
    boarding belongs to a spawned agent, once), per-train capacity, FIFO
    boarding, and one DECIDE per agent and junction in FIREWORK mode.
    """
    problems = []
    times = events["t_s"].to_numpy(dtype=np.float64)
    if times.size > 1 and (np.diff(times) < -TOLERANCE).any():
        problems.append("Event timestamps decrease")
    one_shot = mode is not None and Mode.parse(mode) is Mode.FIREWORK

    spawned, finished = set(), set()
    waiting = deque()
    boarded = Counter()
    decisions = Counter()
    for row in events.itertuples(index=False):
        agent, event = str(row.agent), row.event
        if event == "SPAWN":
            if agent in spawned:
                problems.append(f"Agent {agent} spawned twice")
            spawned.add(agent)
            continue
        if agent not in spawned:
            problems.append(f"{event} for agent {agent} before its SPAWN")
        if event in ("ARRIVE_STATION", "EXIT"):
            if agent in finished:
                problems.append(f"Agent {agent} left the network twice")
            finished.add(agent)
            if event == "ARRIVE_STATION":
                waiting.append(agent)
        elif event == "BOARD":
            if not waiting:
                problems.append(f"Agent {agent} boarded without waiting at the station")
            else:
                first = waiting.popleft()
                if first != agent:
                    problems.append(f"Agent {agent} boarded ahead of {first}")
            boarded[int(row.train)] += 1
        elif event == "DECIDE" and one_shot:
            key = (agent, str(row.junction))
            decisions[key] += 1
            if decisions[key] == 2:
                problems.append(f"Agent {agent} decided twice at junction {row.junction}")
    if capacities is not None:
        for train, count in sorted(boarded.items()):
            if train >= len(capacities) or count > capacities[train]:
                problems.append(f"Train {train} boarded {count} agents over its capacity")
    for problem in problems:
        logger.warning(problem)
    return problems
