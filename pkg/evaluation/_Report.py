import hashlib
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from Documents import format_float, save_document

from ._Metrics import ArrivalSeries, MetricsReport

logger = logging.getLogger(__name__)


def config_hash(*parts) -> str:
    """SHA-256 over file contents (for existing paths) and the text of everything else."""
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, Path) or (isinstance(part, str) and Path(part).is_file()):
            digest.update(Path(part).read_bytes())
        else:
            digest.update(str(part).encode("utf-8"))
        digest.update(b"\0")
    return digest.hexdigest()


def write_report(path: str | Path, report: MetricsReport) -> Path:
    """Write a MetricsReport as XML with the seed list and config hash for provenance."""
    content = {
        "@scenario": report.scenario,
        "@policy": report.policy,
        "@bin_width": format_float(report.bin_width),
        "@cumulative": str(report.cumulative).lower(),
        "@config_hash": report.config_hash,
        "@base_seed": str(min(report.seeds)) if report.seeds else "",
        "mae": {
            "@mean": format_float(report.mae_mean),
            "@sd": format_float(report.mae_sd),
            "replication": [{"@seed": str(s), "#text": format_float(v)} for s, v in zip(report.seeds, report.mae)],
        },
        "rmse": {
            "@mean": format_float(report.rmse_mean),
            "@sd": format_float(report.rmse_sd),
            "replication": [{"@seed": str(s), "#text": format_float(v)} for s, v in zip(report.seeds, report.rmse)],
        },
        "route_share": [
            {
                "@junction": share.junction,
                "alternative": [
                    {"@name": name, "@mean": format_float(m), "@sd": format_float(s)}
                    for name, m, s in zip(share.alternatives, share.mean, share.sd)
                ],
            }
            for share in report.route_shares
        ],
    }
    if report.elapsed.size:
        content["elapsed_s"] = {
            "@mean": format_float(report.elapsed_mean),
            "@sd": format_float(report.elapsed_sd),
            "replication": [{"@seed": str(s), "#text": format_float(v)} for s, v in zip(report.seeds, report.elapsed)],
        }
    return save_document(path, "metrics", content)


def format_report(report: MetricsReport) -> str:
    """Plain-text table for the terminal."""
    lines = [
        f"Scenario {report.scenario}  policy {report.policy}  replications {len(report.seeds)}",
        f"Seeds {report.seeds[0] if report.seeds else '-'}..{report.seeds[-1] if report.seeds else '-'}  config {report.config_hash[:12]}",
        f"Bin width {report.bin_width:g} s{'  (cumulative)' if report.cumulative else ''}",
        f"{'metric':<8}{'mean':>10}{'sd':>10}",
        f"{'MAE':<8}{report.mae_mean:>10.2f}{report.mae_sd:>10.2f}",
        f"{'RMSE':<8}{report.rmse_mean:>10.2f}{report.rmse_sd:>10.2f}",
    ]
    if report.elapsed.size:
        lines.append(f"{'time s':<8}{report.elapsed_mean:>10.1f}{report.elapsed_sd:>10.1f}")
    for share in report.route_shares:
        lines.append(f"Junction {share.junction}")
        for name, m, s in zip(share.alternatives, share.mean, share.sd):
            lines.append(f"  {name:<10}{m:>10.2f}{s:>10.2f}")
    return "\n".join(lines)


def series_frame(reference: Optional[ArrivalSeries], simulated: Sequence[ArrivalSeries], seeds: Sequence[int]) -> pd.DataFrame:
    """One row per bin: reference, every replication and their mean, for plotting."""
    series = [s for s in ([reference] if reference is not None else []) + list(simulated) if s.counts.size]
    if not series:
        return pd.DataFrame(columns=["bin_start_s"])
    width = series[0].bin_width
    start = min(s.start for s in series)
    n_bins = int(round((max(s.end for s in series) - start) / width))
    frame = pd.DataFrame({"bin_start_s": start + width * np.arange(n_bins)})
    if reference is not None:
        frame["reference"] = reference.aligned(start, n_bins)
    for seed, s in zip(seeds, simulated):
        frame[f"seed_{seed}"] = s.aligned(start, n_bins)
    if simulated:
        frame["mean"] = np.mean([s.aligned(start, n_bins) for s in simulated], axis=0)
    return frame


def write_series(path: str | Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info("Wrote %d bins to %s", len(frame), path)
    return path


def read_series(path: str | Path, bin_width: Optional[float] = None) -> ArrivalSeries:
    """Read a reference arrival series (columns bin_start_s, count)."""
    return ArrivalSeries.from_frame(pd.read_csv(path), bin_width)
