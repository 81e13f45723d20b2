"""
Sweep result tables and their file formats.

``emit_csv`` writes::

    sweep_value,policy,mean_se,std_se,n_seeds
    0.0,genie,5.21,0.31,100
    ...

next to a ``<name>.meta.json`` sidecar holding the configuration hash, the
sweep axis and any per-seed failures.  ``emit_plotdata`` writes one row
per sweep value with ``<policy>_mean`` / ``<policy>_std`` columns.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["sweep_value", "policy", "mean_se", "std_se", "n_seeds"]


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    policy: str
    mean_se: float
    std_se: float
    n_seeds: int

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ValueError("a result row needs at least one seed")
        if self.std_se < 0:
            raise ValueError("std_se must be non-negative")


@dataclass(frozen=True)
class RunFailure:
    sweep_value: float
    policy: str
    seed: int
    message: str


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    axis: str = "snr_db"
    config_hash: str = ""
    failures: list[RunFailure] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=RESULT_COLUMNS)

    def mean(self, sweep_value: float, policy: str) -> float:
        for row in self.rows:
            if row.sweep_value == sweep_value and row.policy == policy:
                return row.mean_se
        raise KeyError(f"No row for policy {policy!r} at {sweep_value}")


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def emit_csv(table: ResultTable, path: str | Path) -> Path:
    """Write *table* and its metadata sidecar; returns the CSV path."""
    path = Path(path)
    if not table.rows:
        raise ValueError("refusing to write an empty result table")
    try:
        table.to_frame().to_csv(path, index=False, lineterminator="\n")
        meta = {
            "config_hash": table.config_hash,
            "sweep_axis": table.axis,
            "failures": [asdict(f) for f in table.failures],
        }
        _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Could not write results to {path}: {exc}") from exc
    logger.info("Wrote %d result rows to %s", len(table), path)
    return path


def emit_plotdata(table: ResultTable, path: str | Path) -> Path:
    """One series per policy: ``sweep_value, <policy>_mean, <policy>_std``."""
    path = Path(path)
    if not table.rows:
        raise ValueError("refusing to write an empty result table")
    frame = table.to_frame()
    policies = list(dict.fromkeys(frame["policy"]))
    wide = frame.pivot(index="sweep_value", columns="policy", values=["mean_se", "std_se"])
    out = pd.DataFrame(index=wide.index)
    for p in policies:
        out[f"{p}_mean"] = wide[("mean_se", p)]
        out[f"{p}_std"] = wide[("std_se", p)]
    out = out.reset_index()
    try:
        out.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise OSError(f"Could not write plot data to {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> ResultTable:
    """Parse a table written by :func:`emit_csv` (metadata optional)."""
    path = Path(path)
    frame = pd.read_csv(path, dtype={"policy": str})
    if list(frame.columns) != RESULT_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {list(frame.columns)}")
    rows = [
        ResultRow(
            sweep_value=float(r.sweep_value),
            policy=str(r.policy),
            mean_se=float(r.mean_se),
            std_se=float(r.std_se),
            n_seeds=int(r.n_seeds),
        )
        for r in frame.itertuples(index=False)
    ]
    table = ResultTable(rows=rows)
    meta_path = _meta_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        table.config_hash = meta.get("config_hash", "")
        table.axis = meta.get("sweep_axis", table.axis)
        table.failures = [RunFailure(**f) for f in meta.get("failures", [])]
    return table
