import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..config.logger import LOGGER

FLOAT_FORMAT = "%.17g"


def jsonable(value: Any) -> Any:
    """Plain JSON values; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


class OutputWriter:
    """Single writer for every file the CLI produces; CSV and JSON layouts are byte-stable."""

    def __init__(self, app):
        self.app = app

    def write_table(
        self,
        path: Path,
        header: Sequence[str],
        columns: Sequence[np.ndarray],
        integer_columns: Sequence[str] = (),
    ) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        formats = ["%d" if name in integer_columns else FLOAT_FORMAT for name in header]
        table = np.column_stack([np.asarray(column, dtype=float) for column in columns])
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            np.savetxt(handle, table, fmt=formats, delimiter=",", header=",".join(header), comments="")
        LOGGER.debug(f"wrote {table.shape[0]} rows to {path}")
        return path

    def write_json(self, path: Path, payload: dict[str, Any]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(jsonable(payload), handle, sort_keys=True, indent=2, allow_nan=False)
            handle.write("\n")
        LOGGER.debug(f"wrote {path}")
        return path
