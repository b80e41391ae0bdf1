"""
Tabular reports: a CSV table (header row, RFC-4180 quoting) plus a JSON
summary that carries the configuration echo.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger("surrogate.datastore")


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays to JSON-ready Python values."""
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def _cell(value: Any) -> str:
    value = to_jsonable(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path: Path | str, rows: Sequence[Mapping[str, Any]]) -> Path:
    """Write *rows* as CSV; the header is the union of keys in first-seen order."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fields: List[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with out.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fields})
    return out


def write_report(
    directory: Path | str,
    name: str,
    rows: Sequence[Mapping[str, Any]],
    summary: Optional[Mapping[str, Any]] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, Path]:
    """
    Write ``<name>.csv`` and ``<name>.json`` into *directory*.

    Returns
    -------
    Dict[str, Path]
        Paths of the written files keyed by ``csv`` and ``json``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_table(out / f"{name}.csv", rows)
    json_path = out / f"{name}.json"
    payload = {
        "report": name,
        "rows": len(rows),
        "summary": to_jsonable(summary or {}),
        "config": config,
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Report %s written to %s", name, out)
    return {"csv": csv_path, "json": json_path}
