"""Strategies for inverting a contact transformation into tilde coordinates."""

from .base import InverseMap, Inverter  # noqa: F401
from .chained import ChainedInverter  # noqa: F401
from .explicit import ExplicitInverter  # noqa: F401
from .factory import create_inverter  # noqa: F401
from .solving import SolvingInverter  # noqa: F401
