import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 300.0
ARRIVE_STATION = "ARRIVE_STATION"
EXIT = "EXIT"


class MetricsError(ValueError):
    """Metric inputs cannot be compared."""


@dataclass
class ArrivalSeries:
    """Arrival counts in contiguous bins of ``bin_width`` seconds starting at ``start``."""

    bin_width: float = DEFAULT_BIN_WIDTH
    start: float = 0.0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        if not self.bin_width > 0:
            raise MetricsError("bin_width must be positive")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if (self.counts < 0).any():
            raise MetricsError("Arrival counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def starts(self) -> np.ndarray:
        return self.start + self.bin_width * np.arange(self.counts.size)

    @property
    def end(self) -> float:
        return self.start + self.bin_width * self.counts.size

    @property
    def bins(self) -> list[tuple[float, int]]:
        return list(zip(self.starts.tolist(), self.counts.tolist()))

    def aligned(self, start: float, n_bins: int) -> np.ndarray:
        """Counts on a grid of ``n_bins`` bins from ``start``; bins outside the series count 0."""
        out = np.zeros(n_bins, dtype=np.int64)
        if self.counts.size == 0:
            return out
        shift = int(round((self.start - start) / self.bin_width))
        out[shift : shift + self.counts.size] = self.counts
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_start_s": self.starts, "count": self.counts})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, bin_width: Optional[float] = None) -> "ArrivalSeries":
        starts = frame["bin_start_s"].to_numpy(dtype=np.float64)
        counts = frame["count"].to_numpy(dtype=np.int64)
        if bin_width is None:
            if starts.size < 2:
                raise MetricsError("Cannot infer the bin width of a series with fewer than two bins")
            bin_width = float(starts[1] - starts[0])
        if starts.size and not np.allclose(np.diff(starts), bin_width):
            raise MetricsError("Series bins are not contiguous")
        return cls(bin_width, float(starts[0]) if starts.size else 0.0, counts)


def arrivals(events: pd.DataFrame, bin_width: float = DEFAULT_BIN_WIDTH, kind: str = ARRIVE_STATION) -> ArrivalSeries:
    """Bin the ``kind`` events of a log.

    Bins are aligned to multiples of ``bin_width`` and run from the bin holding
    the first SPAWN to the bin holding the last event. A log without arrivals
    gives an empty series.
    """
    if not bin_width > 0:
        raise MetricsError("bin_width must be positive")
    times = events.loc[events["event"] == kind, "t_s"].to_numpy(dtype=np.float64)
    if times.size == 0:
        return ArrivalSeries(bin_width)
    spawns = events.loc[events["event"] == "SPAWN", "t_s"].to_numpy(dtype=np.float64)
    first = spawns.min() if spawns.size else times.min()
    start = math.floor(min(first, times.min()) / bin_width) * bin_width
    last = events["t_s"].max()
    n_bins = int(math.floor((last - start) / bin_width)) + 1
    index = np.floor((times - start) / bin_width).astype(np.int64)
    return ArrivalSeries(bin_width, start, np.bincount(index, minlength=n_bins))


def mae_rmse(reference: ArrivalSeries, simulated: ArrivalSeries, cumulative: bool = False) -> tuple[float, float]:
    """Mean absolute and root-mean-square error over the union of bins.

    With ``cumulative`` the errors are taken between running totals.
    """
    if not math.isclose(reference.bin_width, simulated.bin_width):
        raise MetricsError(f"Bin widths differ: {reference.bin_width} vs {simulated.bin_width}")
    width = reference.bin_width
    present = [s for s in (reference, simulated) if s.counts.size]
    if not present:
        return 0.0, 0.0
    start = min(s.start for s in present)
    for s in present:
        offset = (s.start - start) / width
        if not math.isclose(offset, round(offset), abs_tol=1e-9):
            raise MetricsError("Series bins are not aligned")
    n_bins = int(round((max(s.end for s in present) - start) / width))
    a = reference.aligned(start, n_bins).astype(np.float64)
    b = simulated.aligned(start, n_bins).astype(np.float64)
    if cumulative:
        a, b = np.cumsum(a), np.cumsum(b)
    diff = a - b
    return float(np.mean(np.abs(diff))), float(np.sqrt(np.mean(diff**2)))


@dataclass
class RouteShare:
    """Final-decision counts per alternative at one junction, one row per replication."""

    junction: str
    alternatives: list[str]
    counts: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.counts.mean(axis=0) if self.counts.size else np.zeros(len(self.alternatives))

    @property
    def sd(self) -> np.ndarray:
        if self.counts.shape[0] < 2:
            return np.zeros(len(self.alternatives))
        return self.counts.std(axis=0, ddof=1)


def route_share(
    logs: Sequence[pd.DataFrame],
    junction: str,
    include_scripted: bool = False,
    alternatives: Optional[Sequence[str]] = None,
) -> RouteShare:
    """Count each agent's last decision at ``junction`` once per replication."""
    finals = []
    for log in logs:
        decided = log[(log["event"] == "DECIDE") & (log["junction"].astype(str) == str(junction))]
        if not include_scripted:
            decided = decided[decided["probabilities"].astype(str) != "scripted"]
        finals.append(decided.drop_duplicates("agent", keep="last")["alternative"].astype(str).value_counts())
    if alternatives is None:
        alternatives = sorted(set().union(*(f.index for f in finals)))
    counts = np.array([[int(f.get(a, 0)) for a in alternatives] for f in finals], dtype=np.float64)
    return RouteShare(str(junction), list(alternatives), counts.reshape(len(finals), len(alternatives)))


@dataclass
class MetricsReport:
    """Per-replication MAE/RMSE against a reference plus route-share tables."""

    mae: np.ndarray
    rmse: np.ndarray
    seeds: list[int]
    bin_width: float
    cumulative: bool = False
    route_shares: list[RouteShare] = field(default_factory=list)
    scenario: str = ""
    policy: str = ""
    config_hash: str = ""
    elapsed: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mae_mean(self) -> float:
        return float(np.mean(self.mae)) if self.mae.size else 0.0

    @property
    def rmse_mean(self) -> float:
        return float(np.mean(self.rmse)) if self.rmse.size else 0.0

    @property
    def mae_sd(self) -> float:
        return float(np.std(self.mae, ddof=1)) if self.mae.size > 1 else 0.0

    @property
    def rmse_sd(self) -> float:
        return float(np.std(self.rmse, ddof=1)) if self.rmse.size > 1 else 0.0

    @property
    def elapsed_mean(self) -> float:
        """Mean wall-clock seconds per replication, NaN when not recorded."""
        return float(np.mean(self.elapsed)) if self.elapsed.size else math.nan

    @property
    def elapsed_sd(self) -> float:
        if not self.elapsed.size:
            return math.nan
        return float(np.std(self.elapsed, ddof=1)) if self.elapsed.size > 1 else 0.0


def compare_replications(
    reference: ArrivalSeries,
    logs: Sequence[pd.DataFrame],
    seeds: Optional[Sequence[int]] = None,
    cumulative: bool = False,
    junctions: Sequence[str] = (),
    include_scripted: bool = False,
    kind: str = ARRIVE_STATION,
    scenario: str = "",
    policy: str = "",
    config_hash: str = "",
    bin_width: Optional[float] = None,
    alternatives: Optional[Mapping[str, Sequence[str]]] = None,
    elapsed: Optional[Sequence[float]] = None,
) -> MetricsReport:
    """MAE/RMSE of every replication's arrival series against ``reference``.

    Simulated series use ``bin_width`` (the reference's by default); a width
    that differs from the reference raises MetricsError.
    ``alternatives`` maps a junction to the rows of its route-share table,
    so alternatives nobody chose still show up with zero counts.
    """
    width = reference.bin_width if bin_width is None else bin_width
    errors = [mae_rmse(reference, arrivals(log, width, kind), cumulative) for log in logs]
    report = MetricsReport(
        mae=np.array([e[0] for e in errors]),
        rmse=np.array([e[1] for e in errors]),
        seeds=list(seeds) if seeds is not None else list(range(len(logs))),
        bin_width=reference.bin_width,
        cumulative=cumulative,
        route_shares=[route_share(logs, j, include_scripted, (alternatives or {}).get(j)) for j in junctions],
        scenario=scenario,
        policy=policy,
        config_hash=config_hash,
        elapsed=np.asarray([] if elapsed is None else elapsed, dtype=np.float64),
    )
    logger.info(
        "%s %s over %d replications: MAE %.2f (%.2f), RMSE %.2f (%.2f)",
        scenario,
        policy,
        len(logs),
        report.mae_mean,
        report.mae_sd,
        report.rmse_mean,
        report.rmse_sd,
    )
    return report
