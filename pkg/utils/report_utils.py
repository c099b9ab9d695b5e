import json
import logging
import os
from typing import Any, Dict, Optional

import pandas as pd

from config.column_config import COLUMN_CONFIG, DIGEST_COLUMN

logger = logging.getLogger(__name__)


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(frame: pd.DataFrame, path: str, artifact: str, digest: Optional[str] = None) -> str:
    """
    Write an artifact table as header-first, comma-separated UTF-8 CSV

    Args:
        frame: Table holding at least the artifact's columns
        path: Destination file
        artifact: Key of COLUMN_CONFIG fixing the column order
        digest: Config digest appended as the last column

    Returns:
        str: The written path
    """
    columns = list(COLUMN_CONFIG[artifact]["columns"])
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"Table for {artifact} is missing columns: {', '.join(missing)}")

    table = frame[columns].copy()
    if digest is not None:
        table[DIGEST_COLUMN] = digest

    _ensure_parent(path)
    # repr-style float formatting is locale independent
    table.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(table))
    return path


def write_sidecar(path: str, metadata: Dict[str, Any]) -> str:
    """Write run metadata next to an artifact as <path>.meta.json"""
    sidecar = f"{path}.meta.json"
    _ensure_parent(sidecar)
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return sidecar


def export_xlsx(frame: pd.DataFrame, path: str, sheet_by: str, digest: Optional[str] = None) -> str:
    """
    Export a report to Excel, one sheet per value of a column

    Args:
        frame: Report table
        path: Destination .xlsx file
        sheet_by: Column whose values name the sheets (e.g. detector)
        digest: Config digest written to a 'meta' sheet
    """
    _ensure_parent(path)
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        for name, sheet in frame.groupby(sheet_by, sort=False):
            sheet.to_excel(writer, sheet_name=str(name)[:31], index=False)
        if digest is not None:
            pd.DataFrame({DIGEST_COLUMN: [digest]}).to_excel(writer, sheet_name="meta", index=False)
    logger.info("Wrote %s", path)
    return path
