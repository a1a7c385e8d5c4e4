"""Differential functions on the jet space over (t, x).

Expressions are plain sympy trees over ``t``, ``x``, the jet variables
``u, u1, u2, ...``, exact rationals, unit constants and opaque function
symbols declared in a :class:`SymbolTable`.  The canonical form is the
reduced fraction produced by ``sympy.cancel`` after rewriting powers of unit
constants, which decides zero for every differential-rational expression.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import sympy
from sympy.core.function import AppliedUndef
from sympy.printing.precedence import PRECEDENCE
from sympy.printing.str import StrPrinter

from . import storage
from .errors import (
    JetOverflowError,
    MissingDerivativeRule,
    NoClosedFormError,
    SymbolTableError,
    UnknownSymbolError,
)
from .settings import get_settings

logger = logging.getLogger(__name__)

Expr = sympy.Expr
ExprLike = Union[sympy.Expr, int, str]

SYMBOLIC = "symbolic"
PROBABILISTIC = "probabilistic"

BUILTIN_CALLS = ("Dx", "sqrt", "exp", "log", "sin", "cos")

T = sympy.Symbol("t", positive=True)
X = sympy.Symbol("x", positive=True)


class UnitConstant(sympy.Symbol):
    """Constant with square one; models the sign of u on a fixed branch."""


EPS = UnitConstant("eps", real=True, nonzero=True)

_JET_NAME = re.compile(r"u(\d*)\Z")


@lru_cache(maxsize=None)
def _jet(j: int) -> sympy.Symbol:
    return sympy.Symbol("u" if j == 0 else f"u{j}", positive=True)


def jet(j: int) -> sympy.Symbol:
    if j < 0:
        raise ValueError("jet index must be non-negative")
    n_max = get_settings().n_max
    if j > n_max:
        raise JetOverflowError(f"jet index {j} exceeds N_max = {n_max}")
    return _jet(j)


U = _jet(0)


def jet_index(symbol: sympy.Basic) -> Optional[int]:
    if not isinstance(symbol, sympy.Symbol) or isinstance(symbol, UnitConstant):
        return None
    match = _JET_NAME.match(symbol.name)
    if match is None:
        return None
    j = int(match.group(1) or 0)
    return j if symbol == _jet(j) else None


def jet_indices(e: Expr) -> List[int]:
    found = {jet_index(s) for s in sympy.sympify(e).free_symbols}
    return sorted(j for j in found if j is not None)


def max_jet(e: Expr) -> int:
    indices = jet_indices(e)
    return indices[-1] if indices else -1


def is_tx_only(e: Expr) -> bool:
    return not jet_indices(e)


def resolve_variable(v: Union[str, sympy.Symbol]) -> sympy.Symbol:
    if isinstance(v, str):
        if v == "t":
            return T
        if v == "x":
            return X
        match = _JET_NAME.match(v)
        if match is None:
            raise UnknownSymbolError(v)
        return jet(int(match.group(1) or 0))
    if v == T or v == X or jet_index(v) is not None:
        return v
    raise ValueError(f"{v} is not t, x or a jet variable")


# ---------------------------------------------------------------------------
# Declared function symbols


class DeclaredFunction(sympy.Function):
    """Opaque function symbol whose partial derivatives come from declared rules."""

    _ck_table: Optional["SymbolTable"] = None
    _ck_params: Tuple[str, ...] = ()
    _ck_rules: Dict[int, str] = {}

    def fdiff(self, argindex=1):
        target = self._ck_rules.get(argindex)
        if target is None:
            params = self._ck_params
            param = params[argindex - 1] if argindex <= len(params) else str(argindex)
            raise MissingDerivativeRule(f"no derivative rule for d({self.func.__name__})/d({param})")
        return self._ck_table.function(target)(*self.args)


@dataclass
class FunctionSymbol:
    name: str
    params: Tuple[str, ...]
    rules: Dict[str, str] = field(default_factory=dict)

    @property
    def arity(self) -> int:
        return len(self.params)


class SymbolTable:
    """Declared function symbols and constants; frozen once configuration is complete."""

    def __init__(self) -> None:
        self._symbols: Dict[str, FunctionSymbol] = {}
        self._classes: Dict[str, type] = {}
        self._constants: Dict[str, sympy.Symbol] = {EPS.name: EPS}
        self._frozen = False

    @property
    def frozen(self) -> bool:
        return self._frozen

    def _check_open(self) -> None:
        if self._frozen:
            raise SymbolTableError("symbol table is frozen")

    def _check_name(self, name: str) -> None:
        if name in ("t", "x") or name in BUILTIN_CALLS or _JET_NAME.match(name):
            raise SymbolTableError(f"'{name}' is reserved")
        if name in self._symbols or name in self._constants:
            raise SymbolTableError(f"'{name}' is already declared")

    def declare(self, name: str, params: Sequence[str]) -> type:
        self._check_open()
        self._check_name(name)
        params = tuple(params)
        if not params:
            raise SymbolTableError(f"function '{name}' needs at least one argument")
        if len(set(params)) != len(params):
            raise SymbolTableError(f"function '{name}' repeats a parameter name")
        self._symbols[name] = FunctionSymbol(name, params)
        cls = type(name, (DeclaredFunction,), {
            "nargs": len(params),
            "_ck_table": self,
            "_ck_params": params,
            "_ck_rules": {},
        })
        self._classes[name] = cls
        return cls

    def rule(self, name: str, param: str, target: str) -> None:
        self._check_open()
        symbol = self._symbols.get(name)
        if symbol is None:
            raise UnknownSymbolError(name)
        if param not in symbol.params:
            raise SymbolTableError(f"'{param}' is not a parameter of '{name}'")
        if param in symbol.rules:
            raise SymbolTableError(f"duplicate rule for d({name})/d({param})")
        symbol.rules[param] = target

    def constant(self, name: str, unit: bool = False) -> sympy.Symbol:
        self._check_open()
        self._check_name(name)
        symbol = UnitConstant(name, real=True, nonzero=True) if unit else sympy.Symbol(name, positive=True)
        self._constants[name] = symbol
        return symbol

    def freeze(self) -> "SymbolTable":
        if self._frozen:
            return self
        for symbol in self._symbols.values():
            for param, target in symbol.rules.items():
                other = self._symbols.get(target)
                if other is None:
                    raise UnknownSymbolError(target)
                if other.arity != symbol.arity:
                    raise SymbolTableError(
                        f"rule d({symbol.name})/d({param}) = {target} changes arity"
                    )
        self._check_acyclic()
        for name, symbol in self._symbols.items():
            self._classes[name]._ck_rules = {
                symbol.params.index(param) + 1: target for param, target in symbol.rules.items()
            }
        self._frozen = True
        return self

    def _check_acyclic(self) -> None:
        state: Dict[str, int] = {}

        def visit(name: str, path: Tuple[str, ...]) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                cycle = " -> ".join(path + (name,))
                raise SymbolTableError(f"derivative rules form a cycle: {cycle}")
            state[name] = 1
            for target in self._symbols[name].rules.values():
                visit(target, path + (name,))
            state[name] = 2

        for name in self._symbols:
            visit(name, ())

    def function(self, name: str) -> type:
        try:
            return self._classes[name]
        except KeyError:
            raise UnknownSymbolError(name) from None

    def has_function(self, name: str) -> bool:
        return name in self._classes

    def constant_symbol(self, name: str) -> sympy.Symbol:
        try:
            return self._constants[name]
        except KeyError:
            raise UnknownSymbolError(name) from None

    def has_constant(self, name: str) -> bool:
        return name in self._constants

    def symbols(self) -> List[FunctionSymbol]:
        return list(self._symbols.values())

    def antiderivative_of(self, name: str) -> Optional[type]:
        for symbol in self._symbols.values():
            if symbol.arity == 1 and symbol.rules.get(symbol.params[0]) == name:
                return self._classes[symbol.name]
        return None

    def derive(self) -> "SymbolTable":
        """Unfrozen copy carrying the same declarations, for adding a header."""
        table = SymbolTable()
        for name, constant in self._constants.items():
            if name != EPS.name:
                table.constant(name, unit=isinstance(constant, UnitConstant))
        for symbol in self._symbols.values():
            table.declare(symbol.name, symbol.params)
        for symbol in self._symbols.values():
            for param, target in symbol.rules.items():
                table.rule(symbol.name, param, target)
        return table

    def header(self) -> str:
        lines = []
        for name, constant in self._constants.items():
            if name != EPS.name:
                lines.append(f"constant {name}{' unit' if isinstance(constant, UnitConstant) else ''};")
        for symbol in self._symbols.values():
            lines.append(f"declare {symbol.name}({', '.join(symbol.params)});")
        for symbol in self._symbols.values():
            for param, target in symbol.rules.items():
                lines.append(f"rule d({symbol.name})/d({param}) = {target};")
        return "\n".join(lines)


@lru_cache(maxsize=1)
def default_table() -> SymbolTable:
    return SymbolTable().freeze()


# ---------------------------------------------------------------------------
# Canonical form and equality


def _reduce_units(e: Expr) -> Expr:
    if not e.has(UnitConstant):
        return e
    return e.replace(
        lambda p: p.is_Pow and isinstance(p.base, UnitConstant) and p.exp.is_Integer,
        lambda p: p.base ** int(p.exp % 2),
    )


def _radical_roots(e: Expr) -> Dict[sympy.Symbol, int]:
    """Positive symbols raised to non-integer rationals, with the lcm of the exponent denominators."""
    roots: Dict[sympy.Symbol, int] = {}
    for node in sympy.preorder_traversal(e):
        if node.is_Pow and _is_radical(node):
            roots[node.base] = int(sympy.ilcm(roots.get(node.base, 1), node.exp.q))
    return roots


def _is_radical(p: sympy.Pow) -> bool:
    return p.base.is_Symbol and p.base.is_positive is True and p.exp.is_Rational and not p.exp.is_Integer


def _canonical(e: Expr) -> Expr:
    for _ in range(4):
        reduced = _reduce_units(e)
        try:
            canonical = sympy.cancel(reduced)
        except sympy.PolynomialError:
            canonical = sympy.together(sympy.expand(reduced))
        canonical = _reduce_units(canonical)
        if canonical == e:
            break
        e = canonical
    return e


def normalize(e: ExprLike) -> Expr:
    e = as_expr(e)
    roots = _radical_roots(e)
    if not roots:
        return _canonical(e)
    # s -> w^q makes every power of s integral; cancel works in w
    dummies = {s: sympy.Dummy(s.name, positive=True) for s in roots}
    lifted = e.xreplace({s: dummies[s] ** q for s, q in roots.items()})
    lowered = _canonical(lifted).xreplace({dummies[s]: s ** sympy.Rational(1, q) for s, q in roots.items()})
    return lowered if _radical_roots(lowered) else _canonical(lowered)


def in_rational_fragment(e: Expr) -> bool:
    """True when zero-testing by ``normalize`` is decisive for e."""
    for node in sympy.preorder_traversal(e):
        if node.is_Pow and not node.exp.is_Integer and not _is_radical(node):
            return False
        if isinstance(node, DeclaredFunction):
            if not all(arg.is_Symbol for arg in node.args):
                return False
        elif isinstance(node, sympy.Function) and not isinstance(node, AppliedUndef):
            return False
    return True


@dataclass(frozen=True)
class Verdict:
    equal: bool
    method: str
    residual: Expr

    def to_dict(self) -> Dict[str, object]:
        return {"equal": self.equal, "method": self.method, "residual": to_dsl(self.residual)}


def compare(a: ExprLike, b: ExprLike, label: Optional[str] = None) -> Verdict:
    a, b = as_expr(a), as_expr(b)
    residual = normalize(a - b)
    if residual == 0:
        verdict = Verdict(True, SYMBOLIC, residual)
    else:
        decidable = in_rational_fragment(residual)
        sampled: Optional[bool] = None
        if get_settings().guard or not decidable:
            from .sampling import probably_equal

            sampled = probably_equal(a, b)
        if decidable:
            if sampled:
                logger.warning("symbolic verdict 'unequal' disagrees with sampling for residual %s", to_dsl(residual))
            verdict = Verdict(False, SYMBOLIC, residual)
        elif sampled is None:
            logger.info("residual %s cannot be decided; reported unequal", to_dsl(residual))
            verdict = Verdict(False, SYMBOLIC, residual)
        else:
            logger.info("probabilistic verdict %s for residual %s", sampled, to_dsl(residual))
            verdict = Verdict(sampled, PROBABILISTIC, residual)
    if label:
        storage.record_identity(label, to_dsl(verdict.residual), verdict.method, verdict.equal)
    return verdict


def equals(a: ExprLike, b: ExprLike) -> bool:
    return compare(a, b).equal


def is_zero(e: ExprLike) -> bool:
    """Zero test for algorithm internals: no guard sampling inside the fragment."""
    residual = normalize(e)
    if residual == 0:
        return True
    if in_rational_fragment(residual):
        return False
    from .sampling import probably_equal

    return bool(probably_equal(residual, sympy.Integer(0)))


# ---------------------------------------------------------------------------
# Differentiation


def partial(e: ExprLike, v: Union[str, sympy.Symbol]) -> Expr:
    return normalize(sympy.diff(as_expr(e), resolve_variable(v)))


def order(e: ExprLike) -> int:
    e = as_expr(e)
    for j in reversed(jet_indices(e)):
        if not is_zero(sympy.diff(e, _jet(j))):
            return j
    return 0


def antiderivative(e: ExprLike, v: Union[str, sympy.Symbol]) -> Expr:
    """Single-variable antiderivative: power rule, logarithm, declared rules."""
    v = resolve_variable(v) if isinstance(v, str) else v
    total = sympy.Integer(0)
    for term in sympy.Add.make_args(sympy.expand(as_expr(e))):
        total += _integrate_term(term, v)
    return normalize(total)


def _integrate_term(term: Expr, v: sympy.Symbol) -> Expr:
    coeff, dep = term.as_independent(v, as_Add=False)
    if dep == 1:
        return coeff * v
    if dep == v:
        return coeff * v**2 / 2
    if dep.is_Pow and dep.base == v and dep.exp.is_Rational:
        if dep.exp == -1:
            return coeff * sympy.log(v)
        return coeff * v ** (dep.exp + 1) / (dep.exp + 1)
    if isinstance(dep, DeclaredFunction) and dep.args == (v,):
        anti = dep.func._ck_table.antiderivative_of(dep.func.__name__)
        if anti is not None:
            return coeff * anti(v)
    parts = _by_parts(dep, v)
    if parts is None:
        parts = _chain_power(dep, v)
    if parts is not None:
        return coeff * parts
    if dep.has(DeclaredFunction):
        raise NoClosedFormError(f"no antiderivative rule in {v}", to_dsl(term))
    integral = sympy.integrate(dep, v)
    if integral.has(sympy.Integral) or integral.has(sympy.Piecewise):
        raise NoClosedFormError(f"no closed-form antiderivative in {v}", to_dsl(term))
    return coeff * integral


def _by_parts(dep: Expr, v: sympy.Symbol) -> Optional[Expr]:
    """v^p F(v) for a declared F with an antiderivative: v^p Fhat - p * integral(v^(p-1) Fhat)."""
    p, rest = 0, []
    for factor in sympy.Mul.make_args(dep):
        base, exp = factor.as_base_exp()
        if base == v and exp.is_Integer and exp > 0:
            p += int(exp)
        else:
            rest.append(factor)
    if p == 0 or len(rest) != 1:
        return None
    F = rest[0]
    if not (isinstance(F, DeclaredFunction) and F.args == (v,)):
        return None
    anti = F.func._ck_table.antiderivative_of(F.func.__name__)
    if anti is None:
        return None
    return v**p * anti(v) - p * _integrate_term(v ** (p - 1) * anti(v), v)


def _chain_power(dep: Expr, v: sympy.Symbol) -> Optional[Expr]:
    """G(v)^a * G'(v) where d(G)/d(v) is a declared rule."""
    factors = sympy.Mul.make_args(dep)
    if len(factors) != 2:
        return None
    for inner, outer in (factors, factors[::-1]):
        base, a = outer.as_base_exp()
        if not all(isinstance(f, DeclaredFunction) and f.args == (v,) for f in (base, inner)):
            continue
        if base.func._ck_rules.get(1) == inner.func.__name__ and a.is_Rational and a != -1:
            return base ** (a + 1) / (a + 1)
    return None


# ---------------------------------------------------------------------------
# Parsing and printing


class DslPrinter(StrPrinter):
    """Prints expressions back in the DSL syntax (``^`` with ``(p/q)`` exponents)."""

    def _print_Pow(self, expr, rational=False):
        exp = expr.exp
        if exp.is_Integer and exp >= 0:
            exponent = str(exp)
        elif exp.is_Rational:
            exponent = f"({exp.p})" if exp.q == 1 else f"({exp.p}/{exp.q})"
        else:
            exponent = f"({self._print(exp)})"
        return f"{self.parenthesize(expr.base, PRECEDENCE['Pow'], strict=True)}^{exponent}"


_PRINTER = DslPrinter()


def to_dsl(e: ExprLike) -> str:
    return _PRINTER.doprint(as_expr(e))


def parse(text: str, table: Optional[SymbolTable] = None) -> Expr:
    from .dsl import parse_expression_with_header

    return parse_expression_with_header(text, table or default_table())


def as_expr(value: ExprLike) -> Expr:
    if isinstance(value, str):
        return parse(value)
    return sympy.sympify(value)


def evaluate(e: ExprLike, assignment: Mapping[Union[str, sympy.Symbol], float], functions=None) -> float:
    from .sampling import evaluate as _evaluate

    return _evaluate(as_expr(e), assignment, functions)
