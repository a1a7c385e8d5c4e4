"""Conservation laws of (1+1)-dimensional evolution equations u_t = F(t, x, u, u_1, ..., u_n)."""

__version__ = "0.1.0"

from .conslaw import (  # noqa: F401
    ConservationLawRecord,
    ConservedVector,
    characteristic,
    conserved_vector,
    flux_from_density,
    invert_dx,
    is_characteristic,
    is_cosymmetry,
    is_trivial_density,
    minimal_density,
    reduce_once,
    structure_check,
    verify,
)
from .errors import ConservkitError  # noqa: F401
from .expr import compare, equals, normalize, order, parse, partial, to_dsl  # noqa: F401
from .jet import DiffOp, EvolutionEquation, frechet, total_dt, total_dx, variational  # noqa: F401
from .settings import Settings, get_settings, use_settings  # noqa: F401
