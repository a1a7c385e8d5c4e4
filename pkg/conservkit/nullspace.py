"""Exact kernels of linear systems whose columns are expressions.

A column is the image of one unknown coefficient.  Columns are brought to a
common denominator, expanded, and split into rational coefficients of their
monomials; the kernel of the resulting matrix over QQ is computed by row
reduction.
"""

from __future__ import annotations

import logging
from functools import reduce
from typing import Dict, List, Sequence, Tuple

import sympy
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .expr import Expr, normalize

logger = logging.getLogger(__name__)

Vector = Tuple[sympy.Rational, ...]


def _common_denominator(denominators: Sequence[Expr]) -> Expr:
    try:
        return reduce(sympy.lcm, denominators, sympy.Integer(1))
    except (sympy.PolynomialError, sympy.GeneratorsNeeded, TypeError):
        logger.debug("lcm failed; using the product of distinct denominators")
        return sympy.Mul(*set(denominators))


def coefficient_rows(columns: Sequence[Expr]) -> Tuple[List[Dict[int, sympy.Rational]], List[Expr]]:
    """Rows keyed by monomial: {column index: rational coefficient}."""
    fractions = [sympy.fraction(sympy.together(normalize(c))) for c in columns]
    denominator = _common_denominator([d for _, d in fractions])
    rows: Dict[Expr, Dict[int, sympy.Rational]] = {}
    for j, (numerator, den) in enumerate(fractions):
        if numerator == 0:
            continue
        scaled = sympy.expand(numerator * sympy.cancel(denominator / den))
        for term in sympy.Add.make_args(scaled):
            coeff, monomial = term.as_coeff_Mul()
            row = rows.setdefault(monomial, {})
            row[j] = row.get(j, sympy.Integer(0)) + coeff
    monomials = sorted(rows, key=sympy.default_sort_key)
    return [rows[m] for m in monomials], monomials


def to_domain_matrix(rows: Sequence[Dict[int, sympy.Rational]], ncols: int) -> DomainMatrix:
    data = {}
    for i, row in enumerate(rows):
        entries = {j: QQ(int(c.p), int(c.q)) for j, c in row.items() if c != 0}
        if entries:
            data[i] = entries
    return DomainMatrix(data, (len(rows), ncols), QQ)


def kernel(columns: Sequence[Expr]) -> List[Vector]:
    """Basis of {c : sum_j c_j columns[j] = 0} over the rationals."""
    ncols = len(columns)
    if ncols == 0:
        return []
    rows, _ = coefficient_rows(columns)
    return kernel_of_rows(rows, ncols)


def kernel_of_rows(rows: Sequence[Dict[int, sympy.Rational]], ncols: int) -> List[Vector]:
    if not rows:
        return [tuple(sympy.Integer(int(i == j)) for i in range(ncols)) for j in range(ncols)]
    reduced, pivots = to_domain_matrix(rows, ncols).rref()
    dense = reduced.to_list()
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        vector = [sympy.Integer(0)] * ncols
        vector[f] = sympy.Integer(1)
        for i, p in enumerate(pivots):
            vector[p] = -QQ.to_sympy(dense[i][f])
        basis.append(primitive(vector))
    return basis


def primitive(vector: Sequence[sympy.Rational]) -> Vector:
    """Integer multiple with coprime entries and first nonzero entry positive."""
    values = [sympy.Rational(v) for v in vector]
    nonzero = [v for v in values if v != 0]
    if not nonzero:
        return tuple(values)
    scale = reduce(sympy.ilcm, (v.q for v in nonzero), 1)
    integers = [v * scale for v in values]
    divisor = reduce(sympy.igcd, (int(abs(v)) for v in integers if v != 0))
    sign = 1 if next(v for v in integers if v != 0) > 0 else -1
    return tuple(sympy.Integer(int(v) // divisor) * sign for v in integers)


def rank(vectors: Sequence[Sequence[sympy.Rational]]) -> int:
    vectors = [v for v in vectors if any(c != 0 for c in v)]
    if not vectors:
        return 0
    rows = [{j: sympy.Rational(c) for j, c in enumerate(v) if c != 0} for v in vectors]
    return to_domain_matrix(rows, len(vectors[0])).rank()


def independent_subset(vectors: Sequence[Sequence[sympy.Rational]]) -> List[int]:
    """Indices of a maximal linearly independent subset, chosen greedily in order."""
    chosen: List[int] = []
    current = 0
    for i, vector in enumerate(vectors):
        trial = rank([vectors[j] for j in chosen] + [vector])
        if trial > current:
            chosen.append(i)
            current = trial
    return chosen
