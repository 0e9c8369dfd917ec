import json
import logging
import math
import xml
from pathlib import Path
from typing import Any, Iterable, Optional

import xmltodict

logger = logging.getLogger(__name__)


def load_document(path: str | Path, root: str, force_list: Iterable[str] = ()) -> dict:
    """Read a structured text file (XML, or JSON as a fallback).

    Args:
        path (str | Path): File to read.
        root (str): Name of the root element. JSON files may either wrap the
            content in this key or provide the content directly.
        force_list (Iterable[str]): Element names that are always returned as
            lists, even when they occur once.

    Returns:
        dict: The content of the root element.

    Raises:
        ValueError: If the file is neither valid XML nor valid JSON, or the
            root element is missing.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = xmltodict.parse(text, force_list=tuple(force_list))
        if root not in data:
            raise ValueError(f"{path} has no <{root}> element")
        return data[root] or {}
    except xml.parsers.expat.ExpatError:
        logger.error("Error parsing XML in %s, trying JSON", path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error("Error parsing JSON in %s", path)
        raise ValueError(f"{path} is neither XML nor JSON: {e}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path} does not hold a {root} object")
    data = _listify(data, set(force_list))
    return data.get(root, data) or {}


def save_document(path: str | Path, root: str, content: dict) -> Path:
    """Write ``content`` as an XML document with ``root`` as the root element."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(xmltodict.unparse({root: content}, pretty=True), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def _listify(data: Any, names: set[str]) -> Any:
    if isinstance(data, dict):
        return {
            k: ([_listify(v, names)] if k in names and not isinstance(v, list) else _listify(v, names))
            for k, v in data.items()
        }
    if isinstance(data, list):
        return [_listify(v, names) for v in data]
    return data


def attr(element: Optional[dict], name: str, default: Any = None) -> Any:
    """Look up ``name`` as an XML attribute (``@name``), child text or JSON key."""
    if not element:
        return default
    if "@" + name in element:
        return element["@" + name]
    value = element.get(name, default)
    if isinstance(value, dict) and "#text" in value:
        return value["#text"]
    return value


def children(element: Optional[dict], *path: str) -> list:
    """Follow ``path`` through nested elements and return the final list (empty if absent)."""
    node = element
    for name in path:
        if not isinstance(node, dict):
            return []
        node = node.get(name)
    if node is None:
        return []
    return node if isinstance(node, list) else [node]


def parse_number(value: Any) -> float:
    """Parse a float, accepting ``inf``/``infinity``/``unlimited`` for unbounded values."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    if text in ("inf", "infinity", "unlimited", "none"):
        return math.inf
    return float(text)


def parse_time(value: Any, origin: float = 0.0) -> float:
    """Convert a time value to seconds from scenario start.

    Numbers are taken as seconds. ``HH:MM`` or ``HH:MM:SS`` clock strings are
    converted to seconds after midnight and shifted by ``origin`` (the scenario
    start clock, also in seconds after midnight).
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if ":" not in text:
        return float(text)
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 2:
        parts.append(0.0)
    if len(parts) != 3:
        raise ValueError(f"Bad clock string {value!r}")
    hours, minutes, seconds = parts
    return hours * 3600.0 + minutes * 60.0 + seconds - origin


def clock_origin(value: Any) -> float:
    """Seconds after midnight of a ``start_clock`` value (0 when absent)."""
    if value is None:
        return 0.0
    return parse_time(value, 0.0)


def format_float(value: float) -> str:
    """Shortest repr that reads back to the identical float."""
    return repr(float(value))
