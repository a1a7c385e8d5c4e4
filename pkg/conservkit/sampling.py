"""Random rational sampling used as the probabilistic equality guard."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Set, Union

import numpy as np
import sympy
from sympy.core.function import AppliedUndef
from sympy.polys.monomials import itermonomials

from .errors import PreconditionError
from .expr import DeclaredFunction, SymbolTable, UnitConstant
from .settings import get_settings

logger = logging.getLogger(__name__)

DIGITS = 30
POLY_DEGREE = 5


class SingularSample(ArithmeticError):
    """Evaluation hit a pole, an undefined value or a complex branch."""


@dataclass
class SamplePoint:
    values: Dict[sympy.Symbol, sympy.Expr] = field(default_factory=dict)
    functions: Dict[str, sympy.Lambda] = field(default_factory=dict)


def _random_rational(rng: np.random.Generator) -> sympy.Rational:
    return sympy.Rational(int(rng.integers(1, 60)), int(rng.integers(1, 13)))


def _random_polynomial(params, degree: int, rng: np.random.Generator) -> sympy.Expr:
    monomials = sorted(itermonomials(list(params), degree), key=sympy.default_sort_key)
    return sympy.Add(*[sympy.Rational(int(rng.integers(1, 9)), int(rng.integers(1, 5))) * m for m in monomials])


def _table_functions(table: SymbolTable, rng: np.random.Generator) -> Dict[str, sympy.Lambda]:
    """Polynomial stand-ins that respect every declared derivative rule."""
    targets = {target for symbol in table.symbols() for target in symbol.rules.values()}
    stand_ins: Dict[str, sympy.Lambda] = {}
    pending = []
    for symbol in table.symbols():
        if symbol.name not in targets:
            params = sympy.symbols(f"p0:{symbol.arity}", positive=True)
            stand_ins[symbol.name] = sympy.Lambda(params, _random_polynomial(params, POLY_DEGREE, rng))
            pending.append(symbol.name)
    while pending:
        name = pending.pop()
        source = next(s for s in table.symbols() if s.name == name)
        lam = stand_ins[name]
        for param, target in source.rules.items():
            if target in stand_ins:
                continue
            index = source.params.index(param)
            stand_ins[target] = sympy.Lambda(lam.variables, sympy.diff(lam.expr, lam.variables[index]))
            pending.append(target)
    return stand_ins


def _tables_in(exprs: Iterable[sympy.Expr]) -> Set[SymbolTable]:
    tables = set()
    for e in exprs:
        for app in e.atoms(DeclaredFunction):
            if app.func._ck_table is not None:
                tables.add(app.func._ck_table)
    return tables


def draw_point(exprs: Iterable[sympy.Expr], rng: np.random.Generator) -> SamplePoint:
    exprs = list(exprs)
    point = SamplePoint()
    symbols = set().union(*(e.free_symbols for e in exprs)) if exprs else set()
    for s in sorted(symbols, key=sympy.default_sort_key):
        if isinstance(s, UnitConstant):
            point.values[s] = sympy.Integer(int(rng.choice([-1, 1])))
        else:
            point.values[s] = _random_rational(rng)
    for table in sorted(_tables_in(exprs), key=lambda t: t.header()):
        point.functions.update(_table_functions(table, rng))
    undefined = set().union(*(e.atoms(AppliedUndef) for e in exprs)) if exprs else set()
    for app in sorted(undefined, key=sympy.default_sort_key):
        name = app.func.__name__
        if name not in point.functions:
            params = sympy.symbols(f"p0:{len(app.args)}", positive=True)
            point.functions[name] = sympy.Lambda(params, _random_polynomial(params, 3, rng))
    return point


def _substitute_functions(e: sympy.Expr, functions: Mapping[str, Callable]) -> sympy.Expr:
    if not functions:
        return e

    def stand_in(app):
        fn = functions.get(app.func.__name__)
        return app if fn is None else fn(*app.args)

    e = e.replace(lambda n: isinstance(n, (DeclaredFunction, AppliedUndef)), stand_in)
    return e.doit() if e.has(sympy.Derivative) else e


def evaluate_point(e: sympy.Expr, point: SamplePoint) -> complex:
    e = _substitute_functions(sympy.sympify(e), point.functions)
    value = e.xreplace(point.values)
    if value.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
        raise SingularSample("pole")
    try:
        number = complex(sympy.N(value, DIGITS))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise SingularSample(str(exc)) from exc
    if abs(number.imag) > 1e-20 * max(1.0, abs(number.real)):
        raise SingularSample("complex branch")
    return number


def probably_equal(
    a: sympy.Expr,
    b: sympy.Expr,
    samples: Optional[int] = None,
    tolerance: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> Optional[bool]:
    """Compare at K random rational points; None when no point could be evaluated."""
    settings = get_settings()
    samples = samples or settings.samples
    tolerance = tolerance or settings.tolerance
    rng = rng if rng is not None else np.random.default_rng(settings.seed)
    agreed = 0
    for _ in range(8 * samples):
        if agreed >= samples:
            break
        point = draw_point([a, b], rng)
        try:
            va = evaluate_point(a, point)
            vb = evaluate_point(b, point)
        except SingularSample:
            continue
        if abs(va - vb) > tolerance * max(1.0, abs(va), abs(vb)):
            return False
        agreed += 1
    if agreed == 0:
        logger.info("no regular sample point found; sampling verdict unavailable")
        return None
    return True


def evaluate(
    e: sympy.Expr,
    assignment: Mapping[Union[str, sympy.Symbol], object],
    functions: Optional[Mapping[str, Callable]] = None,
) -> float:
    """Numeric value of e; declared functions without a supplied stand-in get random polynomials."""
    e = sympy.sympify(e)
    by_name = {s.name: s for s in e.free_symbols}
    values: Dict[sympy.Symbol, sympy.Expr] = {}
    for key, value in assignment.items():
        symbol = by_name.get(key) if isinstance(key, str) else key
        if symbol is not None:
            values[symbol] = sympy.Float(value, DIGITS) if isinstance(value, float) else sympy.sympify(value)
    missing = sorted(s.name for s in e.free_symbols if s not in values)
    if missing:
        raise PreconditionError(f"no value for {', '.join(missing)}")
    point = draw_point([e], np.random.default_rng(get_settings().seed))
    point.values = values
    if functions:
        point.functions.update({name: fn for name, fn in functions.items()})
    try:
        number = evaluate_point(e, point)
    except SingularSample as exc:
        if "complex" in str(exc):
            raise ValueError("fractional power of a negative number") from exc
        raise ZeroDivisionError(f"singular evaluation: {exc}") from exc
    return number.real
