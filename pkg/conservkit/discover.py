"""Ansatz search for conservation laws and cosymmetries.

A density sum_i c_i b_i is a conservation-law density exactly when the
variational derivative of its time derivative vanishes.  That condition is
linear in the constants c_i, so the solution space is the exact kernel of a
rational matrix assembled from the basis terms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.monomials import itermonomials

from .conslaw import (
    ConservationLawRecord,
    ConservedVector,
    cosymmetry_residual,
    flux_from_density,
    is_characteristic,
    minimal_density,
)
from .errors import ConservkitError, PreconditionError
from .expr import (
    T,
    X,
    DeclaredFunction,
    Expr,
    ExprLike,
    _jet,
    as_expr,
    in_rational_fragment,
    is_zero,
    max_jet,
    normalize,
    to_dsl,
)
from .jet import EvolutionEquation, total_dt, variational
from .nullspace import coefficient_rows, independent_subset, kernel
from .settings import get_settings

logger = logging.getLogger(__name__)

GENERIC_F = "holds for generic declared functions; degenerate choices may admit more laws"


@dataclass
class AnsatzSpec:
    basis: List[Expr]
    max_order: int = 0
    auto: Optional[Tuple[int, int, int]] = None

    def __post_init__(self) -> None:
        unique: List[Expr] = []
        for term in (normalize(as_expr(b)) for b in self.basis):
            if term == 0:
                continue
            if any(is_zero(term - other) for other in unique):
                logger.info("dropping duplicate basis term %s", to_dsl(term))
                continue
            unique.append(term)
        self.basis = unique
        if unique:
            self.max_order = max(self.max_order, max(max_jet(b) for b in unique))

    @property
    def unknowns(self) -> List[sympy.Symbol]:
        return list(sympy.symbols(f"c0:{len(self.basis)}")) if self.basis else []


def _sort_key(term: Expr):
    return (max_jet(term), sympy.total_degree(term) if term.is_polynomial() else 0, sympy.default_sort_key(term))


def generate_basis(
    eq: Optional[EvolutionEquation],
    max_order: int,
    jet_degree: int,
    tx_degree: int,
    prune: bool = True,
) -> List[Expr]:
    """Monomials in u..u_{max_order} of degree <= jet_degree times (t, x) monomials of degree <= tx_degree."""
    if min(max_order, jet_degree, tx_degree) < 0:
        raise ValueError("basis parameters must be non-negative")
    jets = [_jet(j) for j in range(max_order + 1)]
    jet_monomials = [m for m in itermonomials(jets, jet_degree) if m != 1]
    tx_monomials = list(itermonomials([T, X], tx_degree))
    size = len(jet_monomials) * len(tx_monomials)
    cap = get_settings().basis_cap
    if size > cap:
        raise PreconditionError(f"basis of {size} terms exceeds the cap of {cap}")
    terms = [j * tx for j in jet_monomials for tx in tx_monomials]
    if prune:
        terms = [b for b in terms if not is_zero(variational(b))]
    return sorted(terms, key=_sort_key)


def ansatz_from_densities(terms: Sequence[ExprLike]) -> AnsatzSpec:
    return AnsatzSpec([as_expr(t) for t in terms])


def auto_ansatz(eq: EvolutionEquation, max_order: int, jet_degree: int, tx_degree: int) -> AnsatzSpec:
    return AnsatzSpec(generate_basis(eq, max_order, jet_degree, tx_degree), max_order, (max_order, jet_degree, tx_degree))


@dataclass
class DiscoveryResult:
    equation: EvolutionEquation
    records: List[ConservationLawRecord] = field(default_factory=list)
    rejected: List[Tuple[Expr, str]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.records)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "equation": to_dsl(self.equation.rhs),
            "dimension": self.dimension,
            "laws": [r.to_dict() for r in self.records],
            "rejected": [{"term": to_dsl(t), "reason": reason} for t, reason in self.rejected],
            "notes": list(self.notes),
        }


def _columns(
    terms: Sequence[Expr], build, result_rejected: List[Tuple[Expr, str]]
) -> Tuple[List[Expr], List[Expr]]:
    kept, columns = [], []
    for b in terms:
        try:
            column = build(b)
        except ConservkitError as exc:
            logger.info("rejecting basis term %s: %s", to_dsl(b), exc)
            result_rejected.append((b, str(exc)))
            continue
        if not in_rational_fragment(column):
            logger.info("rejecting basis term %s: leaves the decidable fragment", to_dsl(b))
            result_rejected.append((b, "leaves the decidable fragment"))
            continue
        kept.append(b)
        columns.append(column)
    return kept, columns


def _coordinate_vectors(exprs: Sequence[Expr]) -> List[Tuple[sympy.Rational, ...]]:
    rows, _ = coefficient_rows(exprs)
    return [tuple(row.get(j, sympy.Integer(0)) for row in rows) for j in range(len(exprs))]


def find_conservation_laws(eq: EvolutionEquation, spec: AnsatzSpec) -> DiscoveryResult:
    result = DiscoveryResult(eq)
    basis, columns = _columns(spec.basis, lambda b: variational(total_dt(b, eq)), result.rejected)
    vectors = kernel(columns)
    densities = [normalize(sum(c * b for c, b in zip(v, basis))) for v in vectors]
    characteristics = [variational(rho) for rho in densities]
    if not characteristics:
        result.notes.append("no conservation laws in ansatz")
        return result
    chosen = independent_subset(_coordinate_vectors(characteristics))
    generic = False
    for i in chosen:
        rho = densities[i]
        try:
            cv = ConservedVector(rho, flux_from_density(eq, rho), eq, name=f"law {len(result.records) + 1}")
            record = minimal_density(cv)
        except ConservkitError as exc:
            logger.info("kernel density %s skipped: %s", to_dsl(rho), exc)
            result.notes.append(f"density {to_dsl(rho)}: {exc}")
            continue
        if rho.has(DeclaredFunction) or eq.rhs.has(DeclaredFunction):
            record.notes.append(GENERIC_F)
            generic = True
        result.records.append(record)
    if generic:
        result.notes.append(f"dimension {result.dimension} {GENERIC_F}")
    if not result.records:
        result.notes.append("no conservation laws in ansatz")
    return result


@dataclass
class CosymmetryRecord:
    gamma: Expr
    characteristic: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"gamma": to_dsl(self.gamma), "characteristic": self.characteristic}


def cosymmetry_scan(eq: EvolutionEquation, spec: AnsatzSpec, include_constant: bool = True) -> List[CosymmetryRecord]:
    terms = list(spec.basis)
    if include_constant and not any(t == 1 for t in terms):
        terms.insert(0, sympy.Integer(1))
    rejected: List[Tuple[Expr, str]] = []
    basis, columns = _columns(terms, lambda b: cosymmetry_residual(eq, b), rejected)
    records = []
    for vector in kernel(columns):
        gamma = normalize(sum(c * b for c, b in zip(vector, basis)))
        records.append(CosymmetryRecord(gamma, is_characteristic(eq, gamma)))
    return records


def cosymmetry_basis(max_order: int, jet_degree: int, tx_degree: int) -> AnsatzSpec:
    """Jet monomials times (t, x) monomials plus the (t, x) monomials themselves."""
    terms = generate_basis(None, max_order, jet_degree, tx_degree, prune=False)
    terms += sorted(itermonomials([T, X], tx_degree), key=sympy.default_sort_key)
    return AnsatzSpec(terms, max_order)
