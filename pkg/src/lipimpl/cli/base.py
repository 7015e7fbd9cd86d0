"""Result writers shared by the batch runner."""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List

from .. import config

logger = logging.getLogger(__name__)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return config.CSV_FLOAT_FORMAT.format(value)
    if value is None:
        return ""
    return str(value)


class ResultWriter:
    """Writes result files into an output directory, each one atomically."""

    def __init__(self, out_dir: Path):
        """Initialize writer, creating the output directory if needed.

        Args:
            out_dir: Directory receiving the result files
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str) -> Path:
        """Write to a temporary file in the target directory, then rename it into place."""
        target = self.out_dir / name
        handle, temp_path = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(handle, "w", newline="") as f:
                f.write(text)
            os.replace(temp_path, target)
        except BaseException:
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise
        logger.debug("Wrote %s", target)
        return target

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2) + "\n")

    def write_csv(self, name: str, rows: List[Dict[str, Any]]) -> Path:
        """Rows as CSV; columns in first-seen order, floats at 17 significant digits."""
        columns: List[str] = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in columns])
        return self.write_text(name, buffer.getvalue())
