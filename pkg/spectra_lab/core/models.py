"""
Record models and enums shared by the runner, the cache and the report writers
"""
import hashlib
import json
import math
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class TaskName(str, Enum):
    SPECTRUM = "spectrum"
    PROBE = "probe"
    AV_SWEEP = "av-sweep"
    CAPACITY = "capacity"
    MOLCHANOV = "molchanov"
    THIN_PROFILE = "thin-profile"
    STRICHARTZ = "strichartz"
    SUPER_POINCARE = "super-poincare"
    FORM_BOUND = "form-bound"
    STABILITY = "stability"


class RunStatus(str, Enum):
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"


def to_jsonable(value: Any) -> Any:
    """
    Plain JSON types: numpy scalars and arrays become floats/lists, enums their
    values, non-finite floats the strings "inf", "-inf" and "nan".
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def content_hash(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


class ReportRecord(BaseModel):
    """Result of one task run, complete or failure-marked"""

    schema_version: int = SCHEMA_VERSION
    task: TaskName
    status: RunStatus = RunStatus.COMPLETED
    seed: int
    config_hash: str
    config: Dict[str, Any] = Field(default_factory=dict)
    payload: Dict[str, Any] = Field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    wall_time: float = 0.0
    library_version: str = ""
    error: Optional[str] = None
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @property
    def failed(self) -> bool:
        return self.status == RunStatus.FAILED
