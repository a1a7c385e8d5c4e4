from __future__ import annotations

from conservkit.errors import InversionError
from conservkit.inverters.base import InverseMap


class ExplicitInverter:
    """Uses the inverse map supplied with the transformation."""

    name = "explicit"

    def invert(self, ct) -> InverseMap:
        if ct.inverse is None:
            raise InversionError(f"{ct.name or 'transformation'}: no inverse map supplied")
        return ct.inverse
