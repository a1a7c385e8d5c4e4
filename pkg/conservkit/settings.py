"""Runtime settings from CONSERVKIT_* variables, scoped per context with use_settings."""

from __future__ import annotations

import os
from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


INVERTER_BACKENDS = ("auto", "explicit", "solve")


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_max: int = Field(32, ge=4, le=256)
    samples: int = Field(8, ge=1, le=64)
    tolerance: float = Field(1e-9, gt=0.0, lt=1.0)
    seed: int = 20080901
    guard: bool = True
    basis_cap: int = Field(2000, ge=1)
    inverter: str = "auto"
    workers: int = Field(1, ge=1, le=64)
    data_dir: Path = Path("data")

    @field_validator("inverter")
    @classmethod
    def _known_inverter(cls, value: str) -> str:
        value = value.lower()
        if value not in INVERTER_BACKENDS:
            raise ValueError(f"inverter must be one of {', '.join(INVERTER_BACKENDS)}")
        return value

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from CONSERVKIT_* variables; unset ones keep their defaults."""
        raw = {
            "n_max": os.getenv("CONSERVKIT_NMAX"),
            "samples": os.getenv("CONSERVKIT_SAMPLES"),
            "tolerance": os.getenv("CONSERVKIT_TOLERANCE"),
            "seed": os.getenv("CONSERVKIT_SEED"),
            "guard": os.getenv("CONSERVKIT_GUARD"),
            "basis_cap": os.getenv("CONSERVKIT_BASIS_CAP"),
            "inverter": os.getenv("CONSERVKIT_INVERTER"),
            "workers": os.getenv("CONSERVKIT_WORKERS"),
            "data_dir": os.getenv("CONSERVKIT_DATA_DIR"),
        }
        return cls(**{key: value for key, value in raw.items() if value not in (None, "")})

    def with_overrides(self, **changes: object) -> "Settings":
        data = self.model_dump()
        data.update({key: value for key, value in changes.items() if value is not None})
        return Settings(**data)


_ACTIVE: ContextVar[Optional[Settings]] = ContextVar("conservkit_settings", default=None)


@lru_cache(maxsize=1)
def _env_settings() -> Settings:
    return Settings.from_env()


def get_settings() -> Settings:
    active = _ACTIVE.get()
    if active is not None:
        return active
    return _env_settings()


def reload_settings() -> Settings:
    _env_settings.cache_clear()
    return get_settings()


@contextmanager
def use_settings(settings: Optional[Settings] = None, **overrides: object) -> Iterator[Settings]:
    base = settings or get_settings()
    scoped = base.with_overrides(**overrides) if overrides else base
    token = _ACTIVE.set(scoped)
    try:
        yield scoped
    finally:
        _ACTIVE.reset(token)
