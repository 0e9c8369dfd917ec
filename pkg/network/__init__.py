from ._Network import (
    PROCEED,
    STOP,
    ControlPoint,
    Junction,
    JunctionAlternative,
    Link,
    Network,
    NetworkError,
    Node,
    NoPathError,
    Schedule,
    Station,
    Train,
    junction_features,
    route_links,
    shortest_distance,
)
from ._Files import read_network

__all__ = [
    "PROCEED",
    "STOP",
    "ControlPoint",
    "Junction",
    "JunctionAlternative",
    "Link",
    "Network",
    "NetworkError",
    "Node",
    "NoPathError",
    "Schedule",
    "Station",
    "Train",
    "junction_features",
    "route_links",
    "shortest_distance",
    "read_network",
]

__version__ = "1.0.0"
__author__ = "Dashtiss"
__license__ = "MIT"
