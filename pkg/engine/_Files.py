import logging
from pathlib import Path

import pandas as pd

from Documents import attr, format_float, load_document, save_document

from ._Run import EVENT_COLUMNS, SUMMARY_COLUMNS, RunOutput

logger = logging.getLogger(__name__)

_TEXT = {"agent": str, "event": str, "junction": str, "alternative": str, "probabilities": str}


def write_events(path: str | Path, events: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    events.to_csv(path, index=False, columns=EVENT_COLUMNS)
    logger.info("Wrote %d events to %s", len(events), path)
    return path


def read_events(path: str | Path) -> pd.DataFrame:
    """Read an event log CSV; empty text fields stay empty strings."""
    frame = pd.read_csv(path, dtype=_TEXT, keep_default_na=False)
    missing = set(EVENT_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    return frame.astype({"t_s": "float64", "train": "int64"})


def write_summary(path: str | Path, output: RunOutput) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    output.summary.to_csv(path, index=False, columns=SUMMARY_COLUMNS)
    logger.info("Wrote %d agent summaries to %s", len(output.agents), path)
    return path


def read_summary(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"id": str, "route": str, "decisions": str, "state": str}, keep_default_na=False, na_values={"spawn_s": [""], "arrival_s": [""]})


def write_run_info(path: str | Path, output: RunOutput) -> Path:
    """Write the run's seed, end time, TRUNCATED flag and wall-clock time."""
    content = {
        "@scenario": output.scenario,
        "@policy": output.policy.value,
        "@seed": str(output.seed),
        "@end_time_s": format_float(output.end_time),
        "@truncated": str(output.truncated).lower(),
        "@elapsed_s": format_float(output.elapsed_s),
    }
    return save_document(path, "run", content)


def read_run_info(path: str | Path) -> dict:
    document = load_document(path, "run")
    return {
        "seed": int(attr(document, "seed")),
        "end_time_s": float(attr(document, "end_time_s")),
        "truncated": attr(document, "truncated") == "true",
        "elapsed_s": float(attr(document, "elapsed_s")),
    }


def write_run(directory: str | Path, output: RunOutput) -> tuple[Path, Path, Path]:
    """Write ``events_<seed>.csv``, ``summary_<seed>.csv`` and ``run_<seed>.xml`` into ``directory``."""
    directory = Path(directory)
    return (
        write_events(directory / f"events_{output.seed}.csv", output.events),
        write_summary(directory / f"summary_{output.seed}.csv", output),
        write_run_info(directory / f"run_{output.seed}.xml", output),
    )
