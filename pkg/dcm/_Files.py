import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from Documents import attr, children, format_float, load_document, save_document

from ._ChoiceModel import ChoiceDataset, ChoiceModel, ParameterVector, UtilitySpec
from ._Estimation import EstimationResult

logger = logging.getLogger(__name__)

SPEC_LISTS = ("factor", "alternative", "beta", "asc")
ID_COLUMNS = ["individual_id", "time_s", "chosen"]


def _spec_from_element(element: dict) -> UtilitySpec:
    factors = [attr(f, "name", f) if isinstance(f, dict) else f for f in children(element, "factor")]
    alternatives = [attr(a, "name", a) if isinstance(a, dict) else a for a in children(element, "alternative")]
    reference = attr(element, "reference", alternatives[0] if alternatives else None)
    if reference in alternatives:
        reference_index = alternatives.index(reference)
    else:
        reference_index = int(reference)
    return UtilitySpec(tuple(factors), tuple(alternatives), reference_index)


def _spec_to_element(spec: UtilitySpec) -> dict:
    return {
        "@reference": spec.alternatives[spec.asc_reference],
        "factor": list(spec.factor_names),
        "alternative": list(spec.alternatives),
    }


def read_spec(path: str | Path) -> UtilitySpec:
    """Read a utility spec file (``<utility_spec>`` with factors, alternatives and reference)."""
    return _spec_from_element(load_document(path, "utility_spec", SPEC_LISTS))


def write_spec(path: str | Path, spec: UtilitySpec) -> Path:
    return save_document(path, "utility_spec", _spec_to_element(spec))


def read_model(path: str | Path) -> ChoiceModel:
    """Read a model file written by ``write_model`` (or hand-written with the same layout)."""
    document = load_document(path, "model", SPEC_LISTS)
    spec = _spec_from_element(document.get("utility_spec", {}))
    betas = {attr(b, "factor"): float(attr(b, "value", b.get("#text"))) for b in children(document, "parameters", "beta")}
    ascs = {attr(a, "alternative"): float(attr(a, "value", a.get("#text"))) for a in children(document, "parameters", "asc")}
    missing = [f for f in spec.factor_names if f not in betas]
    if missing:
        raise ValueError(f"Model file {path} has no beta for {missing}")
    return ChoiceModel(
        spec,
        ParameterVector(
            np.array([betas[f] for f in spec.factor_names]),
            np.array([ascs.get(a, 0.0) for a in spec.alternatives]),
        ),
    )


def write_model(path: str | Path, model: ChoiceModel, result: Optional[EstimationResult] = None) -> Path:
    """Write a model file with parameters and, when given, estimation metadata."""
    spec = model.spec
    content = {
        "utility_spec": _spec_to_element(spec),
        "parameters": {
            "beta": [{"@factor": f, "#text": format_float(b)} for f, b in zip(spec.factor_names, model.params.betas)],
            "asc": [{"@alternative": a, "#text": format_float(c)} for a, c in zip(spec.alternatives, model.params.ascs)],
        },
    }
    if result is not None:
        content["estimation"] = {
            "@log_likelihood": format_float(result.log_likelihood),
            "@null_log_likelihood": format_float(result.null_log_likelihood),
            "@iterations": str(result.iterations),
            "@converged": str(result.converged).lower(),
            "@separation": str(result.separation).lower(),
            "@n_observations": str(result.n_observations),
            "@gradient_norm": format_float(result.gradient_norm),
            "diagnostic": list(result.diagnostics),
        }
    return save_document(path, "model", content)


def observation_columns(spec: UtilitySpec) -> list[str]:
    return [f"{a}:{f}" for a in spec.alternatives for f in spec.factor_names]


def write_observations(path: str | Path, data: ChoiceDataset) -> Path:
    """Write observations as CSV: id, time, chosen, then one ``<alt>:<factor>`` column per cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        data.features.reshape(len(data), -1), columns=observation_columns(data.spec)
    )
    frame.insert(0, "chosen", data.chosen)
    frame.insert(0, "time_s", data.times)
    frame.insert(0, "individual_id", [str(i) for i in data.individual_ids])
    frame.to_csv(path, index=False)
    logger.info("Wrote %d observations to %s", len(data), path)
    return path


def read_observations(path: str | Path, spec: Optional[UtilitySpec] = None) -> ChoiceDataset:
    """Read an observation CSV.

    Without ``spec`` the alternatives and factors are taken from the header in
    column order, with the first alternative as ASC reference.
    """
    frame = pd.read_csv(path, dtype={"individual_id": str}, float_precision="round_trip")
    missing = [c for c in ID_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    feature_columns = [c for c in frame.columns if c not in ID_COLUMNS]
    if spec is None:
        alternatives, factors = [], []
        for column in feature_columns:
            if ":" not in column:
                raise ValueError(f"Column {column!r} is not of the form <alternative>:<factor>")
            alternative, factor = column.split(":", 1)
            if alternative not in alternatives:
                alternatives.append(alternative)
            if factor not in factors:
                factors.append(factor)
        spec = UtilitySpec(tuple(factors), tuple(alternatives), 0)
    columns = observation_columns(spec)
    absent = [c for c in columns if c not in frame.columns]
    if absent:
        raise ValueError(f"{path} lacks feature columns {absent}")
    features = frame[columns].to_numpy(dtype=np.float64).reshape(len(frame), spec.n_alternatives, spec.n_factors)
    return ChoiceDataset(
        spec,
        frame["individual_id"].to_numpy(dtype=object),
        frame["time_s"].to_numpy(dtype=np.float64),
        features,
        frame["chosen"].to_numpy(dtype=np.int64),
    )
