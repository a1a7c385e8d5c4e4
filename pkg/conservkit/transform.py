"""Contact and point transformations of evolution equations and conserved vectors."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .conslaw import ConservedVector, conserved_vector, invert_dx, reduce_once
from .errors import (
    ConservkitError,
    ContactConditionError,
    DegenerateTransformationError,
    InternalConsistencyError,
    InversionError,
    PreconditionError,
)
from .expr import (
    T,
    X,
    Expr,
    ExprLike,
    Verdict,
    _jet,
    antiderivative,
    as_expr,
    compare,
    is_zero,
    max_jet,
    normalize,
    order,
    partial,
    to_dsl,
)
from .inverters import InverseMap, Inverter, create_inverter
from .jet import EvolutionEquation, total_dt, total_dx

logger = logging.getLogger(__name__)

U0, U1 = _jet(0), _jet(1)


@dataclass(frozen=True)
class ContactDiagnostics:
    valid: bool
    shape: bool
    nondegenerate: bool
    contact: bool
    T_t: Expr
    minors: Tuple[Expr, ...]
    contact_residual: Expr
    V: Optional[Expr]
    branch: str
    messages: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, object]:
        return {
            "valid": self.valid,
            "shape": self.shape,
            "nondegenerate": self.nondegenerate,
            "contact": self.contact,
            "T_t": to_dsl(self.T_t),
            "contact_residual": to_dsl(self.contact_residual),
            "V": to_dsl(self.V) if self.V is not None else None,
            "branch": self.branch,
            "messages": list(self.messages),
        }


def _shape_errors(T_: Expr, X_: Expr, U_: Expr) -> List[str]:
    errors = []
    if T_.has(X) or max_jet(T_) >= 0:
        errors.append("T must depend on t only")
    for label, e in (("X", X_), ("U", U_)):
        if max_jet(e) > 1:
            errors.append(f"{label} may depend on t, x, u and u1 only")
    return errors


def jacobian_minors(X_: Expr, U_: Expr) -> Tuple[Expr, Expr, Expr]:
    Xx, Xu, Xp = (partial(X_, v) for v in (X, U0, U1))
    Ux, Uu, Up = (partial(U_, v) for v in (X, U0, U1))
    return (
        normalize(Xx * Uu - Xu * Ux),
        normalize(Xx * Up - Xp * Ux),
        normalize(Xu * Up - Xp * Uu),
    )


def validate_contact(T_: ExprLike, X_: ExprLike, U_: ExprLike) -> ContactDiagnostics:
    T_, X_, U_ = as_expr(T_), as_expr(X_), as_expr(U_)
    messages = _shape_errors(T_, X_, U_)
    shape = not messages
    T_t = partial(T_, T)
    if is_zero(T_t):
        messages.append("T_t vanishes")
    minors = jacobian_minors(X_, U_)
    nondegenerate = not all(is_zero(m) for m in minors)
    if not nondegenerate:
        messages.append("Jacobian of (X, U) in (x, u, u1) has rank below 2")
    total_X = normalize(partial(X_, X) + partial(X_, U0) * U1)
    total_U = normalize(partial(U_, X) + partial(U_, U0) * U1)
    X_p, U_p = partial(X_, U1), partial(U_, U1)
    contact_residual = normalize(total_U * X_p - total_X * U_p)
    contact = compare(contact_residual, 0, label="contact condition").equal
    if not contact:
        messages.append("contact condition violated")
    V: Optional[Expr] = None
    branch = ""
    if not is_zero(total_X):
        V, branch = normalize(total_U / total_X), "total"
    elif not is_zero(X_p):
        V, branch = normalize(U_p / X_p), "u1"
    elif nondegenerate and contact:
        logger.error("both branch denominators vanish for a nondegenerate map")
        raise InternalConsistencyError("cannot extend the transformation to u1")
    valid = not messages and V is not None
    return ContactDiagnostics(valid, shape, nondegenerate, contact, T_t, minors, contact_residual, V, branch, tuple(messages))


@dataclass(frozen=True)
class ContactTransformation:
    T: Expr
    X: Expr
    U: Expr
    V: Expr
    name: str = ""
    phi: Optional[Expr] = None
    inverse: Optional[InverseMap] = None
    diagnostics: Optional[ContactDiagnostics] = field(default=None, compare=False, repr=False)
    _prolongations: Dict[int, Expr] = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def create(
        cls,
        T_: ExprLike,
        X_: ExprLike,
        U_: ExprLike,
        name: str = "",
        phi: Optional[ExprLike] = None,
        inverse: Optional[InverseMap] = None,
        V: Optional[ExprLike] = None,
    ) -> "ContactTransformation":
        diagnostics = validate_contact(T_, X_, U_)
        if not (diagnostics.shape and diagnostics.nondegenerate) or is_zero(diagnostics.T_t):
            raise DegenerateTransformationError(f"{name or 'transformation'}: {'; '.join(diagnostics.messages)}")
        if not diagnostics.contact:
            raise ContactConditionError(
                f"{name or 'transformation'}: contact condition fails, residual {to_dsl(diagnostics.contact_residual)}"
            )
        if V is not None and not compare(V, diagnostics.V, label=f"{name}: supplied V").equal:
            raise ContactConditionError(f"{name or 'transformation'}: supplied V disagrees with {to_dsl(diagnostics.V)}")
        return cls(
            as_expr(T_),
            as_expr(X_),
            as_expr(U_),
            diagnostics.V,
            name,
            as_expr(phi) if phi is not None else None,
            inverse,
            diagnostics,
        )

    @property
    def is_point(self) -> bool:
        return is_zero(partial(self.X, U1)) and is_zero(partial(self.U, U1))

    @property
    def dx_X(self) -> Expr:
        return total_dx(self.X)

    def prolongation(self, k: int) -> Expr:
        if k == 0:
            return self.U
        if k == 1:
            return self.V
        cached = self._prolongations.get(k)
        if cached is None:
            cached = normalize(total_dx(self.prolongation(k - 1)) / self.dx_X)
            self._prolongations[k] = cached
        return cached

    def describe(self) -> str:
        return f"(T, X, U) = ({to_dsl(self.T)}, {to_dsl(self.X)}, {to_dsl(self.U)}), V = {to_dsl(self.V)}"


@dataclass(frozen=True)
class PointTransformation:
    T: Expr
    X: Expr
    U: Expr
    delta: Expr
    name: str = ""

    @classmethod
    def create(cls, T_: ExprLike, X_: ExprLike, U_: ExprLike, name: str = "") -> "PointTransformation":
        T_, X_, U_ = as_expr(T_), as_expr(X_), as_expr(U_)
        if max_jet(X_) > 0 or max_jet(U_) > 0:
            raise DegenerateTransformationError(f"{name or 'point map'}: X and U may depend on t, x and u only")
        if is_zero(partial(T_, T)) or max_jet(T_) >= 0 or T_.has(X):
            raise DegenerateTransformationError(f"{name or 'point map'}: T must be a function of t with T_t != 0")
        delta = normalize(partial(X_, X) * partial(U_, U0) - partial(X_, U0) * partial(U_, X))
        if is_zero(delta):
            raise DegenerateTransformationError(f"{name or 'point map'}: X_x U_u - X_u U_x vanishes")
        return cls(T_, X_, U_, delta, name)

    def as_contact(self, inverse: Optional[InverseMap] = None) -> ContactTransformation:
        return ContactTransformation.create(self.T, self.X, self.U, name=self.name, inverse=inverse)


def prolong(ct: ContactTransformation, k: int) -> Expr:
    """Transformed u_k written in the original jet coordinates."""
    if k < 0:
        raise ValueError("prolongation order must be non-negative")
    return ct.prolongation(k)


def singular_loci(ct: ContactTransformation) -> List[Expr]:
    loci = []
    for e in (ct.dx_X, sympy.denom(ct.V), ct.diagnostics.T_t if ct.diagnostics else sympy.Integer(1)):
        for factor in sympy.Mul.make_args(sympy.factor(e)):
            base = factor.base if factor.is_Pow else factor
            if base.free_symbols and base not in loci:
                loci.append(base)
    if loci:
        logger.info("%s excludes the loci %s", ct.name or "transformation", ", ".join(f"{to_dsl(l)} = 0" for l in loci))
    return loci


# ---------------------------------------------------------------------------
# Inversion


def inverse_transformation(ct: ContactTransformation, inverter: Optional[Inverter] = None) -> ContactTransformation:
    """The inverse map as a transformation of the tilde variables, round-trip checked."""
    inverse = (inverter or create_inverter()).invert(ct)
    forward = InverseMap(ct.T, ct.X, ct.U, ct.V)
    try:
        inv_ct = ContactTransformation.create(
            inverse.T, inverse.X, inverse.U, name=f"{ct.name}^-1", inverse=forward, V=inverse.V
        )
    except ConservkitError as exc:
        raise InversionError(f"{ct.name}: inverse map is not a valid transformation ({exc})") from None
    substitution = {T: inv_ct.T, X: inv_ct.X, U0: inv_ct.U, U1: inv_ct.V}
    for label, f, target in (("t", ct.T, T), ("x", ct.X, X), ("u", ct.U, U0), ("u1", ct.V, U1)):
        if not compare(f.xreplace(substitution), target, label=f"{ct.name}: inverse recovers {label}").equal:
            raise InversionError(f"{ct.name}: inverse map does not recover {label}")
    return inv_ct


def to_tilde(e: ExprLike, ct: ContactTransformation, inverse: Optional[ContactTransformation] = None) -> Expr:
    e = as_expr(e)
    inverse = inverse or inverse_transformation(ct)
    substitution = {T: inverse.T, X: inverse.X}
    for j in range(max_jet(e) + 1):
        substitution[_jet(j)] = inverse.prolongation(j)
    return normalize(e.xreplace(substitution))


def mixed_rhs(eq: EvolutionEquation, ct: ContactTransformation) -> Expr:
    """Transformed right-hand side still written in the original coordinates."""
    F, V = eq.rhs, ct.V
    numerator = (partial(ct.U, U0) - partial(ct.X, U0) * V) * F + partial(ct.U, T) - partial(ct.X, T) * V
    return normalize(numerator / partial(ct.T, T))


def transform_equation(
    eq: EvolutionEquation,
    ct: ContactTransformation,
    inverse: Optional[ContactTransformation] = None,
) -> EvolutionEquation:
    mixed = mixed_rhs(eq, ct)
    try:
        rhs = to_tilde(mixed, ct, inverse)
    except InversionError as exc:
        raise InversionError(f"{exc}; untransformed right-hand side {to_dsl(mixed)}", mixed=to_dsl(mixed)) from None
    singular_loci(ct)
    return EvolutionEquation.from_rhs(rhs, name=f"{eq.name}/{ct.name or 'transformed'}")


def pushforward_cv(
    cv: ConservedVector,
    ct: ContactTransformation,
    target: Optional[EvolutionEquation] = None,
    inverse: Optional[ContactTransformation] = None,
) -> ConservedVector:
    inverse = inverse or inverse_transformation(ct)
    target = target or transform_equation(cv.equation, ct, inverse)
    T_t, dx_X = partial(ct.T, T), ct.dx_X
    dt_X = total_dt(ct.X, cv.equation)
    rho = cv.rho / dx_X
    sigma = cv.sigma / T_t + dt_X * cv.rho / (dx_X * T_t)
    return ConservedVector(
        to_tilde(rho, ct, inverse), to_tilde(sigma, ct, inverse), target, name=f"{cv.name}~" if cv.name else ""
    )


def roundtrip_equation(eq: EvolutionEquation, ct: ContactTransformation) -> Verdict:
    inverse = inverse_transformation(ct)
    transformed = transform_equation(eq, ct, inverse)
    back = transform_equation(transformed, inverse, ct)
    return compare(back.rhs, eq.rhs, label=f"{eq.name}: transform by {ct.name} and back")


# ---------------------------------------------------------------------------
# Unit-characteristic systems


def check_unit_char_systems(rho: ExprLike, X_: ExprLike, U_: ExprLike, phi: ExprLike) -> bool:
    rho, X_, U_, phi = (as_expr(e) for e in (rho, X_, U_, phi))
    if order(rho) > 1:
        raise PreconditionError("density must have order at most 1")
    rho_p = partial(rho, U1)
    equations = (
        partial(phi, X) + U_ * partial(X_, X) - (rho - U1 * rho_p),
        partial(phi, U0) + U_ * partial(X_, U0) - rho_p,
        partial(phi, U1) + U_ * partial(X_, U1),
    )
    for i, residual in enumerate(equations, start=1):
        if not compare(residual, 0, label=f"unit-characteristic system equation {i}").equal:
            return False
    return not all(is_zero(m) for m in jacobian_minors(X_, U_))


def solve_phi(rho: ExprLike, X_: ExprLike, U_: ExprLike) -> Expr:
    """Phi with D_x Phi = rho - U D_x X."""
    rho, X_, U_ = as_expr(rho), as_expr(X_), as_expr(U_)
    return invert_dx(rho - U_ * total_dx(X_))


def compatibility_residual(rho: ExprLike, X_: ExprLike) -> Expr:
    rho, X_ = as_expr(rho), as_expr(X_)
    rho_pp = sympy.diff(rho, U1, 2)
    coefficient = sympy.diff(rho, U0) - U1 * sympy.diff(rho, U0, U1) - sympy.diff(rho, X, U1)
    return normalize(rho_pp * partial(X_, X) + U1 * rho_pp * partial(X_, U0) + coefficient * partial(X_, U1))


def unit_characteristic_transform(eq: EvolutionEquation, rho: ExprLike, name: str = "") -> ContactTransformation:
    """(t, x, rho0) with Phi = 0 after lowering rho to a density free of u1."""
    rho = as_expr(rho)
    if order(rho) > 1:
        raise PreconditionError("density must have order at most 1")
    if order(rho) == 1:
        if not is_zero(sympy.diff(rho, U1, 2)):
            raise PreconditionError("density is nonlinear in u1; only verification is available")
        rho = reduce_once(conserved_vector(eq, rho)).rho
    if not check_unit_char_systems(rho, X, rho, 0):
        raise DegenerateTransformationError("reduced density does not depend on u")
    return ContactTransformation.create(T, X, rho, name=name or "unit characteristic", phi=0)


@dataclass
class ListingCandidate:
    X: Expr
    U: Expr
    V: Optional[Expr]
    phi: Optional[Expr]
    valid: bool
    reason: str

    def to_dict(self) -> Dict[str, object]:
        return {
            "X": to_dsl(self.X),
            "U": to_dsl(self.U),
            "V": to_dsl(self.V) if self.V is not None else None,
            "Phi": to_dsl(self.phi) if self.phi is not None else None,
            "valid": self.valid,
            "reason": self.reason,
        }


def resolve_listing(rho: ExprLike, lines: Sequence[ExprLike], T_: ExprLike = T) -> List[ListingCandidate]:
    """Try every (X, U[, V]) role assignment of printed lines."""
    rho = as_expr(rho)
    lines = [as_expr(line) for line in lines]
    candidates = []
    for i, j in itertools.permutations(range(len(lines)), 2):
        X_, U_ = lines[i], lines[j]
        rest = [lines[k] for k in range(len(lines)) if k not in (i, j)]
        diagnostics = validate_contact(T_, X_, U_)
        if not diagnostics.valid:
            candidates.append(ListingCandidate(X_, U_, diagnostics.V, None, False, "; ".join(diagnostics.messages)))
            continue
        if rest and not any(compare(diagnostics.V, r).equal for r in rest):
            candidates.append(ListingCandidate(X_, U_, diagnostics.V, None, False, "remaining line is not V"))
            continue
        try:
            phi = solve_phi(rho, X_, U_)
        except ConservkitError as exc:
            candidates.append(ListingCandidate(X_, U_, diagnostics.V, None, False, f"no Phi: {exc}"))
            continue
        ok = check_unit_char_systems(rho, X_, U_, phi)
        candidates.append(
            ListingCandidate(X_, U_, diagnostics.V, phi, ok, "verified" if ok else "unit-characteristic system fails")
        )
    return candidates


# ---------------------------------------------------------------------------
# Two zero-order conservation laws


def two_cl_point_transform(
    rhoI: ExprLike, rhoII: ExprLike, U_: Optional[ExprLike] = None, name: str = ""
) -> PointTransformation:
    """X = rhoII_u / rhoI_u and U solving X_x U_u - X_u U_x = rhoI_u."""
    rhoI, rhoII = as_expr(rhoI), as_expr(rhoII)
    if order(rhoI) > 0 or order(rhoII) > 0 or max_jet(rhoI) > 0 or max_jet(rhoII) > 0:
        raise PreconditionError("both densities must have order zero")
    rhoI_u = partial(rhoI, U0)
    X_ = normalize(partial(rhoII, U0) / rhoI_u)
    X_x, X_u = partial(X_, X), partial(X_, U0)
    if is_zero(X_x) and is_zero(X_u):
        raise PreconditionError("rhoII_u / rhoI_u depends on t only")
    if U_ is not None:
        U_ = as_expr(U_)
        jacobian = X_x * partial(U_, U0) - X_u * partial(U_, X)
        if not compare(jacobian, rhoI_u, label="supplied U solves X_x U_u - X_u U_x = rhoI_u").equal:
            raise PreconditionError("supplied U does not satisfy X_x U_u - X_u U_x = rhoI_u")
    elif is_zero(X_u):
        U_ = antiderivative(rhoI_u / X_x, U0)
    elif is_zero(X_x):
        U_ = -antiderivative(rhoI_u / X_u, X)
    else:
        U_ = _characteristic_quadrature(rhoI_u, X_, X_x)
    return PointTransformation.create(T, X_, U_, name=name or "two conservation laws")


def _characteristic_quadrature(rhoI_u: Expr, X_: Expr, X_x: Expr) -> Expr:
    xi = sympy.Symbol("xi_")
    plain_x = sympy.Symbol("x_")
    try:
        roots = sympy.solve(X_.xreplace({X: plain_x}) - xi, plain_x)
    except NotImplementedError:
        roots = []
    if len(roots) != 1:
        raise PreconditionError("U required: cannot solve X = xi for x")
    chi = roots[0]
    integrand = normalize((rhoI_u / X_x).xreplace({X: chi}))
    U_xi = antiderivative(integrand, U0)
    return normalize(U_xi.xreplace({xi: X_}))
