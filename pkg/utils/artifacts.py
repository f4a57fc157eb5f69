"""
CSV tables and JSON sidecars written by the commands.

Every file starts with the config hash so an artifact can always be traced
back to the configuration that produced it.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

HASH_PREFIX = "# config_hash="


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
) -> Path:
    """Write a hash comment line, the header and the rows; floats keep all 17 digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"{HASH_PREFIX}{config_hash}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: Path) -> Dict[str, Any]:
    """Read back a table written by write_csv."""
    with open(path, "r", newline="") as f:
        first = f.readline().rstrip("\n")
        config_hash = first[len(HASH_PREFIX):] if first.startswith(HASH_PREFIX) else None
        reader = csv.reader(f)
        header = next(reader)
        rows: List[List[str]] = [row for row in reader]
    return {"config_hash": config_hash, "header": header, "rows": rows}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no infinities
        return value if np.isfinite(value) else str(value)
    return value


def write_sidecar(
    path: Path,
    config: Dict[str, Any],
    config_hash: str,
    fit: Any,
    wall_time_s: float,
    report: Dict[str, Any],
) -> Path:
    """JSON sidecar {config, config_hash, fit, wall_time_s, report}."""
    payload = {
        "config": config,
        "config_hash": config_hash,
        "fit": fit,
        "wall_time_s": wall_time_s,
        "report": report,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path
