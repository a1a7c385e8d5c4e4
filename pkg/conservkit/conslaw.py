"""Conserved vectors, characteristics and cosymmetries.

A conserved vector (rho, sigma) of u_t = F satisfies D_t rho + D_x sigma = 0.
Densities are reduced to minimal order by integration by parts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import sympy

from .errors import (
    InternalConsistencyError,
    IrreducibleError,
    NoClosedFormError,
    NotADensityError,
    PreconditionError,
)
from .expr import (
    X,
    Expr,
    ExprLike,
    _jet,
    antiderivative,
    as_expr,
    compare,
    is_zero,
    normalize,
    order,
    partial,
    to_dsl,
)
from .jet import EvolutionEquation, frechet, total_dt, total_dx, variational

logger = logging.getLogger(__name__)


@dataclass
class ConservedVector:
    rho: Expr
    sigma: Expr
    equation: EvolutionEquation
    name: str = ""
    _verified: Optional[bool] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.rho = normalize(as_expr(self.rho))
        self.sigma = normalize(as_expr(self.sigma))

    @property
    def verified(self) -> Optional[bool]:
        return self._verified

    def mark_verified(self, value: bool) -> None:
        if self._verified is None:
            self._verified = value
        elif self._verified != value:
            raise InternalConsistencyError(f"verification status of {self.label} changed")

    @property
    def label(self) -> str:
        return self.name or to_dsl(self.rho)


@dataclass
class ConservationLawRecord:
    representative: ConservedVector
    characteristic: Expr
    density_order: int
    trivial: bool = False
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verified": bool(self.representative.verified),
            "density": to_dsl(self.representative.rho),
            "flux": to_dsl(self.representative.sigma),
            "characteristic": to_dsl(self.characteristic),
            "density_order": self.density_order,
            "trivial": self.trivial,
            "notes": list(self.notes),
        }


def verify(cv: ConservedVector) -> bool:
    if cv.verified is not None:
        return cv.verified
    residual = total_dt(cv.rho, cv.equation) + total_dx(cv.sigma)
    verdict = compare(residual, 0, label=f"{cv.label}: D_t(rho) + D_x(sigma) = 0 on {cv.equation.name}")
    cv.mark_verified(verdict.equal)
    return verdict.equal


def is_trivial_density(rho: ExprLike) -> bool:
    rho = as_expr(rho)
    return compare(variational(rho), 0, label=f"{to_dsl(rho)} in Im D_x").equal


def characteristic(cv: ConservedVector) -> Expr:
    return variational(cv.rho)


def cosymmetry_residual(eq: EvolutionEquation, gamma: ExprLike) -> Expr:
    """gamma_t + gamma_* F + F_*^dagger gamma."""
    gamma = as_expr(gamma)
    residual = partial(gamma, "t") + frechet(gamma).apply(eq.rhs) + frechet(eq.rhs).adjoint().apply(gamma)
    return normalize(residual)


def is_cosymmetry(eq: EvolutionEquation, gamma: ExprLike) -> bool:
    gamma = as_expr(gamma)
    residual = cosymmetry_residual(eq, gamma)
    return compare(residual, 0, label=f"{to_dsl(gamma)} is a cosymmetry of {eq.name}").equal


def is_characteristic(eq: EvolutionEquation, gamma: ExprLike) -> bool:
    gamma = as_expr(gamma)
    if not frechet(gamma).is_self_adjoint():
        return False
    return is_cosymmetry(eq, gamma)


def reduce_once(cv: ConservedVector) -> ConservedVector:
    """(rho - D_x Phi, sigma + D_t Phi) with Phi = integral of rho_{u_k} in u_{k-1}."""
    k = order(cv.rho)
    if k == 0:
        raise IrreducibleError(0)
    top = partial(cv.rho, _jet(k))
    if not is_zero(partial(top, _jet(k))):
        raise IrreducibleError(k)
    phi = antiderivative(top, _jet(k - 1))
    rho = cv.rho - total_dx(phi)
    sigma = cv.sigma + total_dt(phi, cv.equation)
    logger.debug("reduced %s at order %d with Phi = %s", cv.label, k, to_dsl(phi))
    return ConservedVector(rho, sigma, cv.equation, name=cv.name)


def minimal_density(cv: ConservedVector) -> ConservationLawRecord:
    if not verify(cv):
        raise PreconditionError(f"{cv.label} is not a conserved vector of {cv.equation.name}")
    current = cv
    while order(current.rho) > 0:
        try:
            current = reduce_once(current)
        except IrreducibleError:
            break
    if not verify(current):
        logger.error("reduction of %s lost the conservation property", cv.label)
        raise InternalConsistencyError(f"reduced density of {cv.label} does not verify")
    trivial = is_trivial_density(current.rho)
    density_order = order(current.rho)
    n = cv.equation.order
    if not trivial and n % 2 == 0 and density_order > n // 2:
        logger.error("density order %d of %s exceeds n/2 for %s", density_order, cv.label, cv.equation.name)
        raise InternalConsistencyError(
            f"density order {density_order} exceeds {n // 2} for an even-order equation"
        )
    notes = ["trivial conserved vector"] if trivial else []
    return ConservationLawRecord(current, characteristic(current), density_order, trivial, notes)


def _strip_to_tx(g: Expr) -> tuple[Expr, Expr]:
    """Peel total derivatives off g until only a function of (t, x) remains."""
    zeta = sympy.Integer(0)
    residual = normalize(g)
    while True:
        m = order(residual)
        if m == 0:
            if not is_zero(partial(residual, _jet(0))):
                raise PreconditionError(f"{to_dsl(residual)} is not a total x-derivative")
            return normalize(zeta), residual
        top = partial(residual, _jet(m))
        if not is_zero(partial(top, _jet(m))):
            raise PreconditionError(f"{to_dsl(residual)} is not affine in u{m}")
        phi = antiderivative(top, _jet(m - 1))
        zeta += phi
        residual = normalize(residual - total_dx(phi))


def _invert_dx(g: Expr) -> Expr:
    zeta, residual = _strip_to_tx(g)
    if not is_zero(residual):
        try:
            zeta += antiderivative(residual, X)
        except NoClosedFormError:
            raise NoClosedFormError("no closed form for the x-integration", to_dsl(residual)) from None
    return normalize(zeta)


def invert_dx(g: ExprLike) -> Expr:
    """zeta with D_x zeta = g."""
    g = as_expr(g)
    if not compare(variational(g), 0, label=f"{to_dsl(g)} in Im D_x").equal:
        raise PreconditionError(f"{to_dsl(g)} is not a total x-derivative")
    return _invert_dx(g)


def flux_from_density(eq: EvolutionEquation, rho: ExprLike) -> Expr:
    rho = as_expr(rho)
    rate = total_dt(rho, eq)
    if not compare(variational(rate), 0, label=f"{to_dsl(rho)} is a density of {eq.name}").equal:
        raise NotADensityError(f"{to_dsl(rho)} is not a conservation-law density of {eq.name}")
    return normalize(-_invert_dx(rate))


def conserved_vector(eq: EvolutionEquation, rho: ExprLike, name: str = "") -> ConservedVector:
    return ConservedVector(as_expr(rho), flux_from_density(eq, rho), eq, name=name)


@dataclass
class StructureReport:
    quasi_linear: bool
    conservative: bool
    doubly_conservative: bool
    G: Optional[Expr] = None
    H: Optional[Expr] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "quasi_linear": self.quasi_linear,
            "conservative": self.conservative,
            "doubly_conservative": self.doubly_conservative,
            "G": to_dsl(self.G) if self.G is not None else None,
            "H": to_dsl(self.H) if self.H is not None else None,
            "notes": list(self.notes),
        }


def structure_check(eq: EvolutionEquation) -> StructureReport:
    F, n = eq.rhs, eq.order
    un, um = _jet(n), _jet(n - 1)
    quasi_linear = (
        is_zero(sympy.diff(F, un, 2))
        and is_zero(sympy.diff(F, um, 3))
        and is_zero(sympy.diff(F, un, um))
    )
    report = StructureReport(quasi_linear, False, False)
    if not is_zero(variational(F)):
        return report
    try:
        G = _invert_dx(F)
    except NoClosedFormError as exc:
        report.notes.append(str(exc))
        return report
    report.conservative, report.G = True, G
    if is_zero(variational(G)):
        try:
            report.H = _invert_dx(G)
            report.doubly_conservative = True
        except NoClosedFormError as exc:
            report.notes.append(str(exc))
    return report
