from __future__ import annotations

import logging
from typing import Sequence

from conservkit.errors import InversionError
from conservkit.inverters.base import InverseMap, Inverter

logger = logging.getLogger(__name__)


class ChainedInverter:
    name = "auto"

    def __init__(self, inverters: Sequence[Inverter]) -> None:
        self.inverters = list(inverters)

    def invert(self, ct) -> InverseMap:
        failures = []
        for inverter in self.inverters:
            try:
                return inverter.invert(ct)
            except InversionError as exc:
                failures.append(f"{inverter.name}: {exc}")
            except Exception as exc:  # noqa: BLE001
                logger.warning("%s inverter failed on %s: %s", inverter.name, ct.name, exc)
                failures.append(f"{inverter.name}: {exc}")
        raise InversionError("; ".join(failures) or "no inverter configured")
