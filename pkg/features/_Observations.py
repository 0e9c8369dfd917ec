import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from dcm import EVACUATION_FACTORS, FIREWORK_FACTORS, ChoiceDataset, UtilitySpec
from network import Network, junction_features

from ._Evacuation import SENSING_RADIUS, EvacDecisionContext, evac_features

logger = logging.getLogger(__name__)

EVACUATION = "EVACUATION"
FIREWORK = "FIREWORK"
DECISION_WINDOW = 0.5
STATIONARY = 0.05


@dataclass
class BuildReport:
    observations: int = 0
    skipped_agents: list = field(default_factory=list)
    carried_headings: int = 0
    dropped_windows: int = 0


@dataclass
class _Window:
    time: float
    position: np.ndarray
    heading: np.ndarray
    chosen: int


def read_trajectories(path: str | Path) -> pd.DataFrame:
    """Trajectory CSV with columns id, t_s, x_m, y_m."""
    frame = pd.read_csv(path, dtype={"id": str})
    missing = {"id", "t_s", "x_m", "y_m"} - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    return frame


def read_choice_log(path: str | Path) -> pd.DataFrame:
    """Junction choice CSV with columns id, t_s, junction_id, chosen."""
    frame = pd.read_csv(path, dtype={"id": str, "junction_id": str})
    missing = {"id", "t_s", "junction_id", "chosen"} - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    return frame


def _bearing_choice(position: np.ndarray, heading: np.ndarray, start_points: np.ndarray) -> int:
    bearings = start_points - position
    cross = heading[0] * bearings[:, 1] - heading[1] * bearings[:, 0]
    dot = bearings @ heading
    return int(np.argmin(np.abs(np.arctan2(cross, dot))))


def _windows(times: np.ndarray, xy: np.ndarray, start_points: np.ndarray, window: float, report: BuildReport) -> list[_Window]:
    count = int(np.floor((times[-1] - times[0]) / window + 1e-9))
    grid = times[0] + window * np.arange(count + 1)
    positions = np.column_stack([np.interp(grid, times, xy[:, 0]), np.interp(grid, times, xy[:, 1])])
    windows = []
    heading = None
    for k in range(1, count + 1):
        displacement = positions[k] - positions[k - 1]
        distance = float(np.hypot(*displacement))
        if distance < STATIONARY:
            if heading is None:
                report.dropped_windows += 1
                continue
            report.carried_headings += 1
        else:
            heading = displacement / distance
        windows.append(_Window(float(grid[k]), positions[k], heading, _bearing_choice(positions[k], heading, start_points)))
    return windows


def _position_at(times: np.ndarray, xy: np.ndarray, t: float) -> Optional[np.ndarray]:
    if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        return None
    return np.array([np.interp(t, times, xy[:, 0]), np.interp(t, times, xy[:, 1])])


def _latest_choice(windows: list[_Window], t: float) -> Optional[int]:
    chosen = None
    for w in windows:
        if w.time > t + 1e-9:
            break
        chosen = w.chosen
    return chosen


def build_evacuation_observations(
    trajectories: pd.DataFrame,
    start_points: np.ndarray,
    alternatives: Sequence[str] = ("Route1", "Route2"),
    window: float = DECISION_WINDOW,
    sensing_radius: float = SENSING_RADIUS,
    distance_unit: float = 1.0,
) -> tuple[ChoiceDataset, BuildReport]:
    """One observation per pedestrian per decision window, chosen route read off the heading."""
    start_points = np.asarray(start_points, dtype=np.float64).reshape(-1, 2)
    spec = UtilitySpec(EVACUATION_FACTORS, tuple(alternatives), 0)
    report = BuildReport()
    tracks = {}
    for agent_id, rows in trajectories.sort_values(["id", "t_s"], kind="stable").groupby("id", sort=True):
        times = rows["t_s"].to_numpy(dtype=np.float64)
        if times.size < 2 or times[-1] <= times[0]:
            report.skipped_agents.append(agent_id)
            continue
        xy = rows[["x_m", "y_m"]].to_numpy(dtype=np.float64)
        tracks[agent_id] = (times, xy, _windows(times, xy, start_points, window, report))
    if report.skipped_agents:
        logger.warning("Skipped %d trajectories with fewer than 2 samples", len(report.skipped_agents))

    ids, times_out, features, chosen = [], [], [], []
    for agent_id, (_, _, windows) in tracks.items():
        previous = None
        for w in windows:
            neighbors = []
            for other_id, (other_times, other_xy, other_windows) in tracks.items():
                if other_id == agent_id:
                    continue
                position = _position_at(other_times, other_xy, w.time)
                choice = _latest_choice(other_windows, w.time)
                if position is not None and choice is not None:
                    neighbors.append((position, choice))
            ctx = EvacDecisionContext(w.position, w.heading, start_points, previous, neighbors, sensing_radius, distance_unit)
            ids.append(agent_id)
            times_out.append(w.time)
            features.append(evac_features(ctx))
            chosen.append(w.chosen)
            previous = w.chosen
    report.observations = len(ids)
    if not ids:
        return ChoiceDataset.empty(spec), report
    return ChoiceDataset(spec, np.array(ids, dtype=object), np.array(times_out), np.stack(features), np.array(chosen)), report


def build_firework_observations(
    choices: pd.DataFrame,
    network: Network,
    distance_unit: Optional[float] = None,
) -> tuple[ChoiceDataset, BuildReport]:
    """One observation per junction crossing with the junction's features at crossing time."""
    junctions = list(network.junctions.values())
    if not junctions:
        raise ValueError("The network has no junctions")
    alternatives = tuple(junctions[0].names)
    if any(len(j.alternatives) != len(alternatives) for j in junctions):
        raise ValueError("All junctions must offer the same number of alternatives")
    spec = UtilitySpec(FIREWORK_FACTORS, alternatives, 0)
    report = BuildReport()
    ids, times, features, chosen = [], [], [], []
    for row in choices.itertuples(index=False):
        junction = network.junctions.get(str(row.junction_id))
        if junction is None:
            raise ValueError(f"Choice log names unknown junction {row.junction_id}")
        value = row.chosen
        index = junction.names.index(value) if isinstance(value, str) and value in junction.names else int(value)
        ids.append(row.id)
        times.append(float(row.t_s))
        features.append(junction_features(network, junction, None, float(row.t_s), distance_unit))
        chosen.append(index)
    report.observations = len(ids)
    if not ids:
        return ChoiceDataset.empty(spec), report
    return ChoiceDataset(spec, np.array(ids, dtype=object), np.array(times), np.stack(features), np.array(chosen)), report


def build_observations(log: pd.DataFrame, mode: str, **kwargs) -> tuple[ChoiceDataset, BuildReport]:
    """Dispatch on mode: EVACUATION needs ``start_points``, FIREWORK needs ``network``."""
    if str(mode).upper() == EVACUATION:
        return build_evacuation_observations(log, **kwargs)
    if str(mode).upper() == FIREWORK:
        return build_firework_observations(log, **kwargs)
    raise ValueError(f"Unknown mode {mode!r}")
