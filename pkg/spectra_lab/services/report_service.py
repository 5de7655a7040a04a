"""
Report Service - writes ReportRecords as JSON and CSV files
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from spectra_lab.core.models import ReportRecord, to_jsonable

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


class ReportService:
    """Serializes records into an output directory"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)

    def write_json(self, record: ReportRecord) -> Path:
        path = self.out_dir / f"{record.task.value}.json"
        # repr of a float is its shortest round-trip form
        text = json.dumps(to_jsonable(record.model_dump()), indent=2, allow_nan=False)
        path.write_text(text + "\n")
        return path

    def write_csv(self, record: ReportRecord) -> List[Path]:
        paths = []
        tables: Dict[str, List[dict]] = record.tables or {"main": []}
        for name, rows in tables.items():
            suffix = "" if name == "main" else f"_{name}"
            path = self.out_dir / f"{record.task.value}{suffix}.csv"
            frame = pd.DataFrame(to_jsonable_rows(rows))
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
            paths.append(path)
        return paths

    def emit(self, record: ReportRecord, formats: Sequence[str] = ("csv", "json")) -> List[Path]:
        """Write the record in every requested format; failure-marked records are written too"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths: List[Path] = []
        for fmt in formats:
            if fmt == "json":
                paths.append(self.write_json(record))
            elif fmt == "csv":
                paths.extend(self.write_csv(record))
            else:
                raise ValueError(f"Unknown report format: {fmt}")
        logger.info(f"Report for {record.task.value} ({record.status.value}) written to {self.out_dir}")
        return paths


def to_jsonable_rows(rows: List[dict]) -> List[dict]:
    """Rows with numpy scalars unwrapped; non-finite floats stay floats for pandas"""
    clean = []
    for row in rows:
        clean.append({k: (v.item() if hasattr(v, "item") else v) for k, v in row.items()})
    return clean


def emit_report(record: ReportRecord, out_dir: Union[str, Path], formats: Sequence[str] = ("csv", "json")) -> List[Path]:
    return ReportService(out_dir).emit(record, formats)


def load_report(path: Union[str, Path]) -> dict:
    """Read a JSON report back, turning "inf"/"-inf"/"nan" strings into floats"""

    def restore(value):
        if isinstance(value, dict):
            return {k: restore(v) for k, v in value.items()}
        if isinstance(value, list):
            return [restore(v) for v in value]
        if value in ("inf", "-inf", "nan"):
            return float(value)
        return value

    return restore(json.loads(Path(path).read_text()))
