"""
Process-level settings for the laboratory.
"""
from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LabSettings(BaseSettings):
    log_level: str = "INFO"
    log_json: bool = False

    dense_budget: int = Field(4000, gt=0)  # largest active dimension for dense eigh
    node_budget: int = Field(250_000, gt=0)
    max_eigenpairs: int = Field(600, gt=0)
    lanczos_max_iter: int = Field(3000, gt=0)
    krylov_max_dim: int = Field(400, gt=1)

    cache_dir: Optional[str] = None
    workers: int = Field(1, ge=1)

    model_config = SettingsConfigDict(env_prefix="SPECTRA_LAB_", env_file=".env", extra="ignore")


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    return LabSettings()
