import logging
from pathlib import Path
from typing import Optional

from Documents import attr, children, clock_origin, load_document, parse_number, parse_time

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
    Schedule,
    Station,
    Train,
)

logger = logging.getLogger(__name__)

NETWORK_LISTS = (
    "node",
    "link",
    "origin",
    "junction",
    "alternative",
    "attraction",
    "guidance",
    "interval",
    "control_point",
    "train",
)


def _optional_float(value) -> Optional[float]:
    return None if value is None else float(value)


def _alternative(element: dict, origin: float) -> JunctionAlternative:
    attraction = Schedule(
        [(parse_time(attr(a, "start"), origin), parse_time(attr(a, "end"), origin), 1) for a in children(element, "attraction")],
        default=0,
    )
    start_point = None
    if attr(element, "x") is not None and attr(element, "y") is not None:
        start_point = (float(attr(element, "x")), float(attr(element, "y")))
    return JunctionAlternative(
        name=attr(element, "name"),
        link=attr(element, "link"),
        distance=_optional_float(attr(element, "distance")),
        attraction=attraction,
        start_point=start_point,
    )


def _mode(value: str) -> str:
    mode = str(value).strip().upper()
    if mode not in (PROCEED, STOP):
        raise NetworkError(f"Unknown control mode {value!r}")
    return mode


def read_network(path: str | Path, origin: Optional[float] = None) -> Network:
    """Load a network file.

    Times may be seconds from scenario start or ``HH:MM`` clock strings; clock
    strings are measured from ``origin`` (seconds after midnight), which
    defaults to the file's ``start_clock`` attribute.
    """
    document = load_document(path, "network", NETWORK_LISTS)
    if origin is None:
        origin = clock_origin(attr(document, "start_clock"))

    nodes = [
        Node(attr(n, "id"), _optional_float(attr(n, "x")), _optional_float(attr(n, "y")))
        for n in children(document, "nodes", "node")
    ]
    links = [
        Link(
            attr(l, "id"),
            attr(l, "from"),
            attr(l, "to"),
            float(attr(l, "length")),
            float(attr(l, "width", 1.0)),
            int(attr(l, "lanes", 1)),
        )
        for l in children(document, "links", "link")
    ]

    guidance = {}
    for g in children(document, "guidance"):
        guidance[attr(g, "junction")] = Schedule(
            [
                (parse_time(attr(i, "start"), origin), parse_time(attr(i, "end"), origin), int(attr(i, "alternative")))
                for i in children(g, "interval")
            ],
            default=None,
        )
    junctions = []
    for j in children(document, "junctions", "junction"):
        node = attr(j, "node")
        alternatives = tuple(_alternative(a, origin) for a in children(j, "alternative"))
        junctions.append(Junction(node, alternatives, guidance.pop(node, Schedule(default=None))))
    if guidance:
        raise NetworkError(f"Guidance for unknown junctions {sorted(guidance)}")

    link_by_id = {l.id: l for l in links}
    control_points = []
    for c in children(document, "control_points", "control_point"):
        schedule = Schedule(
            [
                (parse_time(attr(i, "start"), origin), parse_time(attr(i, "end"), origin), _mode(attr(i, "mode")))
                for i in children(c, "interval")
            ],
            default=PROCEED,
        )
        if attr(c, "link") is not None:
            control_points.append(ControlPoint(attr(c, "id"), attr(c, "link"), float(attr(c, "offset", 0.0)), schedule))
        else:
            node = attr(c, "node")
            incoming = sorted((l for l in links if l.target == node), key=lambda l: l.id)
            if not incoming:
                raise NetworkError(f"Control point {attr(c, 'id')} at node {node} has no incoming link")
            for link in incoming:
                control_points.append(ControlPoint(f"{attr(c, 'id')}@{link.id}", link.id, link_by_id[link.id].length, schedule))

    station = None
    station_element = document.get("station")
    if station_element:
        station = Station(
            attr(station_element, "node"),
            parse_number(attr(station_element, "platform_capacity", "inf")),
            tuple(
                Train(parse_time(attr(t, "departure"), origin), int(attr(t, "capacity")))
                for t in children(station_element, "train")
            ),
        )

    network = Network(
        nodes=nodes,
        links=links,
        junctions=junctions,
        control_points=control_points,
        station=station,
        origins=[o if isinstance(o, str) else attr(o, "node") for o in children(document, "origins", "origin")],
        destination=attr(document, "destination"),
        distance_unit=float(attr(document, "distance_unit", 1.0)),
        name=attr(document, "name", Path(path).stem),
    )
    logger.info(
        "Loaded network %s: %d nodes, %d links, %d junctions, %d control points",
        network.name,
        len(network.nodes),
        len(network.links),
        len(network.junctions),
        len(network.control_points),
    )
    return network
