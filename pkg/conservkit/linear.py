"""Linear evolution equations u_t = sum_i A^i(t, x) u_i.

Covers the adjoint equation and the linear conservation laws it generates,
the determining system for cosymmetries gamma = sum_k g^k u_k + v, its exact
solution on polynomial ansatzes, and the quadratic conservation laws built
from self-adjoint operators Gamma.
"""

from __future__ import annotations

import contextvars
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.monomials import itermonomials

from . import storage
from .conslaw import ConservedVector, cosymmetry_residual, flux_from_density, is_characteristic
from .errors import PreconditionError
from .expr import (
    SYMBOLIC,
    T,
    X,
    Expr,
    ExprLike,
    _jet,
    as_expr,
    compare,
    is_zero,
    max_jet,
    normalize,
    to_dsl,
)
from .jet import DiffOp, EvolutionEquation
from .nullspace import kernel, rank
from .settings import get_settings

logger = logging.getLogger(__name__)


def _tx_only(coefficients: Sequence[ExprLike], what: str) -> Tuple[Expr, ...]:
    coeffs = [normalize(as_expr(c)) for c in coefficients]
    for c in coeffs:
        if max_jet(c) >= 0:
            raise PreconditionError(f"{what} coefficient {to_dsl(c)} depends on jet variables")
    while coeffs and is_zero(coeffs[-1]):
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class LinearOperator:
    coefficients: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        coeffs = _tx_only(self.coefficients, "operator")
        if len(coeffs) < 3:
            raise PreconditionError("a linear evolution equation needs order n >= 2")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def op(self) -> DiffOp:
        return DiffOp(self.coefficients)

    def coefficient(self, i: int) -> Expr:
        return self.coefficients[i] if 0 <= i < len(self.coefficients) else sympy.Integer(0)

    def equation(self, name: str = "linear") -> EvolutionEquation:
        return EvolutionEquation.from_rhs(sum(c * _jet(i) for i, c in enumerate(self.coefficients)), name=name)

    def __str__(self) -> str:
        return str(self.op)


@dataclass(frozen=True)
class GammaOperator:
    coefficients: Tuple[Expr, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _tx_only(self.coefficients, "Gamma"))

    @classmethod
    def from_diffop(cls, op: DiffOp) -> "GammaOperator":
        return cls(op.coefficients)

    @property
    def op(self) -> DiffOp:
        return DiffOp(self.coefficients)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def apply(self, e: ExprLike = None) -> Expr:
        return self.op.apply(_jet(0) if e is None else e)

    def __str__(self) -> str:
        return str(self.op)


def split_affine(eq: EvolutionEquation) -> Tuple[Optional[LinearOperator], Optional[Expr]]:
    """(operator, source term) when F is affine in the jet variables, else (None, None)."""
    F = eq.rhs
    coefficients = [normalize(sympy.diff(F, _jet(i))) for i in range(eq.order + 1)]
    if any(max_jet(c) >= 0 for c in coefficients):
        return None, None
    source = normalize(F - sum(c * _jet(i) for i, c in enumerate(coefficients)))
    if max_jet(source) >= 0:
        return None, None
    return LinearOperator(tuple(coefficients)), source


def as_linear(eq: EvolutionEquation) -> Optional[LinearOperator]:
    op, source = split_affine(eq)
    if op is None:
        return None
    if not is_zero(source):
        logger.info("%s is affine with source term %s; not linear", eq.name, to_dsl(source))
        return None
    return op


def formal_adjoint(op: LinearOperator) -> LinearOperator:
    return LinearOperator(op.op.adjoint().coefficients)


def is_adjoint_solution(op: LinearOperator, v: ExprLike) -> bool:
    v = as_expr(v)
    if max_jet(v) >= 0:
        raise PreconditionError("v must depend on t and x only")
    residual = sympy.diff(v, T) + op.op.adjoint().apply(v)
    return compare(residual, 0, label=f"{to_dsl(v)} solves v_t + F^dagger v = 0").equal


def linear_flux(op: LinearOperator, v: ExprLike) -> ConservedVector:
    """(v u, sum_i sigma^i u_i) with sigma^{n-1} = -v A^n, sigma^i = -v A^{i+1} - D_x sigma^{i+1}."""
    v = as_expr(v)
    if not is_adjoint_solution(op, v):
        raise PreconditionError(f"{to_dsl(v)} does not solve the adjoint equation")
    n = op.order
    sigma: List[Expr] = [sympy.Integer(0)] * n
    sigma[n - 1] = normalize(-v * op.coefficient(n))
    for i in range(n - 2, -1, -1):
        sigma[i] = normalize(-v * op.coefficient(i + 1) - sympy.diff(sigma[i + 1], X))
    flux = sum(s * _jet(i) for i, s in enumerate(sigma))
    return ConservedVector(v * _jet(0), flux, op.equation(), name=f"linear law v = {to_dsl(v)}")


# ---------------------------------------------------------------------------
# Determining systems


@dataclass
class DeterminingSystem:
    op: LinearOperator
    r: int
    g: Tuple[Expr, ...]
    v: Expr
    equations: List[Tuple[str, Expr]] = field(default_factory=list)

    def coefficient_of(self, m: int) -> Expr:
        for label, e in self.equations:
            if label == f"u{m}":
                return e
        return sympy.Integer(0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "operator": str(self.op),
            "r": self.r,
            "equations": [{"monomial": label, "residual": to_dsl(e)} for label, e in self.equations],
        }


def ansatz_functions(r: int) -> Tuple[Tuple[Expr, ...], Expr]:
    g = tuple(sympy.Function(f"g{k}")(T, X) for k in range(r + 1))
    return g, sympy.Function("v")(T, X)


def determining_system(op: LinearOperator, r: int) -> DeterminingSystem:
    """Coefficients of each u_m in the cosymmetry condition for gamma = sum g^k u_k + v."""
    if r < 0:
        raise ValueError("r must be non-negative")
    g, v = ansatz_functions(r)
    gamma = sum(gk * _jet(k) for k, gk in enumerate(g)) + v
    residual = sympy.expand(cosymmetry_residual(op.equation(), gamma))
    system = DeterminingSystem(op, r, g, v)
    rest = residual
    for m in range(r + op.order, -1, -1):
        coefficient = normalize(sympy.diff(residual, _jet(m)))
        rest = rest - coefficient * _jet(m)
        if not is_zero(coefficient):
            system.equations.append((f"u{m}", coefficient))
    rest = normalize(rest)
    if not is_zero(rest):
        system.equations.append(("1", rest))
    return system


def top_residual_shape(op: LinearOperator, r: int) -> Expr:
    """Coefficient of u_{n+r-1} for odd n: (r - n) A^n_x g^r + 2 A^{n-1} g^r - n A^n g^r_x."""
    n = op.order
    g, _ = ansatz_functions(r)
    A_n, A_n1, g_r = op.coefficient(n), op.coefficient(n - 1), g[r]
    return normalize((r - n) * sympy.diff(A_n, X) * g_r + 2 * A_n1 * g_r - n * A_n * sympy.diff(g_r, X))


@dataclass(frozen=True)
class DeterminingSolution:
    gamma: GammaOperator
    v: Expr
    vector: Tuple[sympy.Rational, ...]

    @property
    def jet_dependent(self) -> bool:
        return not self.gamma.is_zero

    def to_dict(self) -> Dict[str, object]:
        return {"Gamma": str(self.gamma), "v": to_dsl(self.v)}


def _tx_monomials(degree: int) -> List[Expr]:
    return sorted(itermonomials([T, X], degree), key=sympy.default_sort_key)


def _ansatz_columns(r: int, degree: int) -> List[Tuple[Optional[int], Expr]]:
    """(k, monomial) for gamma = monomial * u_k, with k = None for the v part."""
    monomials = _tx_monomials(degree)
    return [(k, m) for k in range(r + 1) for m in monomials] + [(None, m) for m in monomials]


def _column(eq: EvolutionEquation, k: Optional[int], m: Expr) -> Expr:
    gamma = m if k is None else m * _jet(k)
    return cosymmetry_residual(eq, gamma)


def solve_determining(op: LinearOperator, r: int, degree: int) -> List[DeterminingSolution]:
    """Basis of cosymmetries with g^k and v polynomial in (t, x) up to ``degree``."""
    if r < 0 or degree < 0:
        raise ValueError("r and degree must be non-negative")
    eq = op.equation()
    ansatz = _ansatz_columns(r, degree)
    workers = get_settings().workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(contextvars.copy_context().run, _column, eq, k, m) for k, m in ansatz
            ]
            columns = [f.result() for f in futures]
    else:
        columns = [_column(eq, k, m) for k, m in ansatz]
    logger.info("determining system for %s: %d ansatz columns (r=%d, degree=%d)", op, len(columns), r, degree)
    solutions = []
    for vector in kernel(columns):
        g = [sympy.Integer(0)] * (r + 1)
        v = sympy.Integer(0)
        for c, (k, m) in zip(vector, ansatz):
            if c == 0:
                continue
            if k is None:
                v += c * m
            else:
                g[k] += c * m
        solutions.append(DeterminingSolution(GammaOperator(tuple(g)), normalize(v), vector))
    return solutions


def ansatz_vector(gamma: GammaOperator, v: ExprLike, r: int, degree: int) -> Tuple[sympy.Rational, ...]:
    """Coordinates of (Gamma, v) in the polynomial ansatz used by solve_determining."""
    polys = [sympy.Poly(gamma.coefficients[k] if k <= gamma.order else 0, T, X) for k in range(r + 1)]
    v_poly = sympy.Poly(as_expr(v), T, X)
    vector = []
    for k, m in _ansatz_columns(r, degree):
        poly = v_poly if k is None else polys[k]
        exponents = sympy.Poly(m, T, X).monoms()[0]
        vector.append(sympy.Rational(poly.coeff_monomial(exponents)))
    return tuple(vector)


def span_contains(solutions: Sequence[DeterminingSolution], gamma: GammaOperator, v: ExprLike, r: int, degree: int) -> bool:
    vectors = [s.vector for s in solutions]
    target = ansatz_vector(gamma, v, r, degree)
    return rank(vectors + [target]) == rank(vectors)


# ---------------------------------------------------------------------------
# Gamma operators and quadratic laws


def check_gamma(op: LinearOperator, G: GammaOperator) -> bool:
    """Gamma_t + Gamma F + F^dagger Gamma = 0 as an operator identity."""
    F = op.op
    combined = G.op.partial_t() + G.op.compose(F) + F.adjoint().compose(G.op)
    verdict = combined.is_zero
    storage.record_identity(f"Gamma = {G} satisfies Gamma_t + Gamma F + F^dagger Gamma = 0", str(combined), SYMBOLIC, verdict)
    return verdict


def self_adjoint_part(G: GammaOperator) -> GammaOperator:
    return GammaOperator.from_diffop(G.op.add(G.op.adjoint()).scale(sympy.Rational(1, 2)))


def quadratic_cv(op: LinearOperator, G: GammaOperator, name: str = "") -> ConservedVector:
    if not G.op.is_self_adjoint():
        raise PreconditionError("Gamma is not formally self-adjoint; use self_adjoint_part")
    if not check_gamma(op, G):
        raise PreconditionError(f"Gamma = {G} does not satisfy the Gamma-operator condition")
    eq = op.equation()
    u = _jet(0)
    rho = normalize(u * G.apply(u) / 2)
    cv = ConservedVector(rho, flux_from_density(eq, rho), eq, name=name or f"quadratic law Gamma = {G}")
    if not is_characteristic(eq, G.apply(u)):
        raise PreconditionError(f"Gamma u is not a characteristic of {eq.name}")
    return cv


UPSILON = (X, sympy.Integer(0), 3 * T)


def upsilon_gamma(l: int, m: int) -> GammaOperator:
    """D_x^m Upsilon^l D_x^m with Upsilon = x + 3t D_x^2."""
    if l < 0 or m < 0:
        raise ValueError("l and m must be non-negative")
    upsilon = DiffOp(UPSILON)
    dx_m = DiffOp.dx(m)
    return GammaOperator.from_diffop(dx_m.compose(upsilon.power(l)).compose(dx_m))
