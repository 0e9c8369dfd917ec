from ._Metrics import (
    DEFAULT_BIN_WIDTH,
    ArrivalSeries,
    MetricsError,
    MetricsReport,
    RouteShare,
    arrivals,
    compare_replications,
    mae_rmse,
    route_share,
)
from ._Report import config_hash, format_report, read_series, series_frame, write_report, write_series
from ._Cli import OUT_ENV, UsageError, build_parser, cli

__all__ = [
    "DEFAULT_BIN_WIDTH",
    "ArrivalSeries",
    "MetricsError",
    "MetricsReport",
    "RouteShare",
    "arrivals",
    "compare_replications",
    "mae_rmse",
    "route_share",
    "config_hash",
    "format_report",
    "read_series",
    "series_frame",
    "write_report",
    "write_series",
    "OUT_ENV",
    "UsageError",
    "build_parser",
    "cli",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
