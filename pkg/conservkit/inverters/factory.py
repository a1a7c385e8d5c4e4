from __future__ import annotations

from typing import Optional

from conservkit.inverters.base import Inverter
from conservkit.inverters.chained import ChainedInverter
from conservkit.inverters.explicit import ExplicitInverter
from conservkit.inverters.solving import SolvingInverter
from conservkit.settings import get_settings


def create_inverter(backend: Optional[str] = None) -> Inverter:
    backend = (backend or get_settings().inverter).lower()
    if backend == "explicit":
        return ExplicitInverter()
    if backend == "solve":
        return SolvingInverter()
    return ChainedInverter([ExplicitInverter(), SolvingInverter()])
