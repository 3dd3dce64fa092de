"""
Result files: CSV tables, the run manifest and aggregate rows.

CSV conventions: UTF-8, header row, '.' decimal separator, reals with 17
significant digits, booleans as true/false and undefined metrics as empty
fields.
"""

import csv
import hashlib
import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from ici_whitening.metrics import UNDEFINED, is_undefined, mean_defined

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = "1.0.0"


def format_cell(value: Any) -> str:
    if value is None or is_undefined(value):
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def aggregate_rows(
    rows: Sequence[Dict[str, Any]],
    keys: Sequence[str],
    values: Sequence[str],
    count_column: str = "n_drops",
) -> List[Dict[str, Any]]:
    """
    Mean of every value column over rows sharing the key columns, in first-seen
    key order. UNDEFINED entries are skipped; a column with no defined entry
    stays UNDEFINED. '<column>_defined' counts the entries that contributed.
    """
    groups: "OrderedDict[tuple, List[Dict[str, Any]]]" = OrderedDict()
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)

    out = []
    for key, members in groups.items():
        agg: Dict[str, Any] = dict(zip(keys, key))
        agg[count_column] = len(members)
        for column in values:
            entries = [m[column] for m in members]
            agg[column] = mean_defined(entries)
            agg[f"{column}_defined"] = sum(not is_undefined(e) for e in entries)
        out.append(agg)
    return out


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    path: Path,
    kind: str,
    master_seed: int,
    config_text: str,
    config: Dict[str, Any],
    files: Dict[str, Path],
    n_tasks: int,
) -> Path:
    """Resolved config, seed, artifact version and a checksum for every data file."""
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "kind": kind,
        "master_seed": master_seed,
        "n_tasks": n_tasks,
        "config": config,
        "config_text": config_text,
        "files": {name: {"path": p.name, "sha256": sha256_file(p)} for name, p in files.items()},
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"Wrote manifest {path}")
    return path


__all__ = [
    "ARTIFACT_VERSION",
    "UNDEFINED",
    "aggregate_rows",
    "format_cell",
    "read_csv",
    "sha256_file",
    "write_csv",
    "write_manifest",
]
