"""pyparsing grammar for expressions, symbol headers and problem files.

Expressions follow the usual precedence (sum, product, unary sign, power)
with exact rational exponents written as ``u^-2`` or ``u^(1/2)``.  Problem
files are parsed in two passes: statements are split first with the
expression bodies kept as raw text, declarations are applied and the symbol
table frozen, and only then are the bodies parsed.
"""

from __future__ import annotations

import logging
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import pyparsing as pp
import sympy

from .errors import DslSyntaxError, UnknownSymbolError
from .expr import EPS, T, X, SymbolTable, default_table, jet, normalize

logger = logging.getLogger(__name__)

LPAR, RPAR = map(pp.Suppress, "()")
NAME = pp.Regex(r"[A-Za-z_][A-Za-z_0-9]*")
INTEGER = pp.Regex(r"\d+")
SIGNED_INTEGER = pp.Regex(r"[+-]?\d+")


@dataclass(frozen=True)
class _ParseContext:
    table: SymbolTable
    source: str
    offset: int


_CONTEXT: ContextVar[Optional[_ParseContext]] = ContextVar("conservkit_dsl_context", default=None)


def _position(loc: int) -> Tuple[int, int]:
    ctx = _CONTEXT.get()
    if ctx is None:
        return 1, loc + 1
    absolute = ctx.offset + loc
    return pp.lineno(absolute, ctx.source), pp.col(absolute, ctx.source)


# ---------------------------------------------------------------------------
# Expression actions


def _number(s, loc, toks):
    return sympy.Rational(toks[0])


def _name(s, loc, toks):
    name = toks[0]
    ctx = _CONTEXT.get()
    table = ctx.table if ctx else default_table()
    if name == "t":
        return T
    if name == "x":
        return X
    if name == "eps":
        return EPS
    if name == "u" or (name.startswith("u") and name[1:].isdigit()):
        return jet(int(name[1:] or 0))
    if table.has_constant(name):
        return table.constant_symbol(name)
    line, col = _position(loc)
    raise UnknownSymbolError(name, line, col)


_BUILTINS = {
    "sqrt": (1, sympy.sqrt),
    "exp": (1, sympy.exp),
    "log": (1, sympy.log),
    "sin": (1, sympy.sin),
    "cos": (1, sympy.cos),
}


def _call(s, loc, toks):
    name, args = toks[0], list(toks[1])
    line, col = _position(loc)
    if name == "Dx":
        from .jet import total_dx_power

        if len(args) not in (1, 2):
            raise DslSyntaxError("Dx takes an expression and an optional order", line, col)
        k = args[1] if len(args) == 2 else sympy.Integer(1)
        if not (k.is_Integer and k >= 0):
            raise DslSyntaxError("Dx order must be a non-negative integer", line, col)
        return total_dx_power(args[0], int(k))
    if name in _BUILTINS:
        arity, fn = _BUILTINS[name]
        if len(args) != arity:
            raise DslSyntaxError(f"{name} takes {arity} argument", line, col)
        return fn(args[0])
    ctx = _CONTEXT.get()
    table = ctx.table if ctx else default_table()
    if not table.has_function(name):
        raise UnknownSymbolError(name, line, col)
    cls = table.function(name)
    if len(args) != len(cls._ck_params):
        raise DslSyntaxError(f"{name} takes {len(cls._ck_params)} argument(s), got {len(args)}", line, col)
    return cls(*args)


def _exponent(s, loc, toks):
    p = int(toks[0])
    q = int(toks[1]) if len(toks) > 1 else 1
    if q == 0:
        line, col = _position(loc)
        raise DslSyntaxError("zero denominator in exponent", line, col)
    return sympy.Rational(p, q)


def _factor(s, loc, toks):
    if len(toks) == 1:
        return toks[0]
    base, exponent = toks[0], toks[1]
    if base == 0 and exponent < 0:
        line, col = _position(loc)
        raise DslSyntaxError("zero raised to a negative power", line, col)
    return base**exponent


def _unary(s, loc, toks):
    return -toks[1] if toks[0] == "-" else toks[1]


def _fold(s, loc, toks):
    result = toks[0]
    for op, operand in zip(toks[1::2], toks[2::2]):
        if op == "+":
            result = result + operand
        elif op == "-":
            result = result - operand
        elif op == "*":
            result = result * operand
        else:
            if operand == 0:
                line, col = _position(loc)
                raise DslSyntaxError("division by zero", line, col)
            result = result / operand
    return result


def _expression_grammar(actions: bool) -> pp.ParserElement:
    expr = pp.Forward()
    number = pp.Regex(r"\d+(\.\d+)?")
    name = NAME.copy()
    call = name.copy() + LPAR + pp.Group(pp.DelimitedList(expr)) + RPAR
    base = call | number | name | (LPAR + expr + RPAR)
    exponent = SIGNED_INTEGER.copy() | (LPAR + SIGNED_INTEGER + pp.Opt(pp.Suppress("/") + INTEGER) + RPAR)
    exponent = pp.Group(exponent)
    factor = base + pp.Opt(pp.Suppress("^") + exponent)
    unary = pp.Forward()
    signed = pp.one_of("+ -") + unary
    unary <<= signed | factor
    term = unary + pp.ZeroOrMore(pp.one_of("* /") + unary)
    expr <<= term + pp.ZeroOrMore(pp.one_of("+ -") + term)
    if actions:
        number.set_parse_action(_number)
        name.set_parse_action(_name)
        call.set_parse_action(_call)
        exponent.set_parse_action(lambda s, loc, toks: _exponent(s, loc, toks[0]))
        factor.set_parse_action(_factor)
        signed.set_parse_action(_unary)
        term.set_parse_action(_fold)
        expr.set_parse_action(_fold)
    expr.ignore(pp.python_style_comment)
    return expr


_EXPRESSION = _expression_grammar(actions=True)
_EXPRESSION_SHAPE = _expression_grammar(actions=False)


def parse_expression(
    text: str,
    table: Optional[SymbolTable] = None,
    source: Optional[str] = None,
    offset: int = 0,
) -> sympy.Expr:
    """Parse and normalize one expression; positions are reported relative to ``source``."""
    ctx = _ParseContext(table or default_table(), source if source is not None else text, offset)
    token = _CONTEXT.set(ctx)
    try:
        result = _EXPRESSION.parse_string(text, parse_all=True)
    except pp.ParseException as exc:
        line, col = _position(exc.loc)
        raise DslSyntaxError(f"syntax error: {exc.msg}", line, col) from None
    finally:
        _CONTEXT.reset(token)
    return normalize(result[0])


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Chunk:
    """Raw expression text and its offset in the source."""

    text: str
    start: int


@dataclass
class Statement:
    kind: str
    name: str
    loc: int
    fields: Dict[str, Any] = field(default_factory=dict)


def _chunk() -> pp.ParserElement:
    def locate(s, loc, toks):
        text = toks[0]
        return Chunk(text, s.index(text, loc))

    return pp.original_text_for(_EXPRESSION_SHAPE).add_parse_action(locate)


def _assign(key: str) -> pp.ParserElement:
    return pp.Suppress(pp.Keyword(key)) + pp.Suppress("=") + _chunk()(key) + pp.Suppress(";")


def _plain(value: Any) -> Any:
    if isinstance(value, pp.ParseResults):
        keys = list(value.keys())
        if keys:
            return {key: value[key] for key in keys}
        return list(value)
    return value


def _statement(kind: str, body: pp.ParserElement) -> pp.ParserElement:
    def build(s, loc, toks):
        values = {key: _plain(toks[key]) for key in toks.keys()}
        name = values.pop("name", "")
        return Statement(kind, name, loc, values)

    return (pp.Suppress(pp.Keyword(kind)) + body).set_parse_action(build)


def _statement_grammar() -> Tuple[pp.ParserElement, pp.ParserElement]:
    SEMI = pp.Suppress(";")
    EQ = pp.Suppress("=")
    LBRACE, RBRACE = pp.Suppress("{"), pp.Suppress("}")
    LBRACK, RBRACK = pp.Suppress("["), pp.Suppress("]")
    name = NAME.copy()

    declare = _statement("declare", name("name") + LPAR + pp.Group(pp.DelimitedList(NAME))("params") + RPAR + SEMI)
    rule = _statement(
        "rule",
        pp.Suppress("d") + LPAR + name("name") + RPAR + pp.Suppress("/") + pp.Suppress("d")
        + LPAR + NAME("param") + RPAR + EQ + NAME("target") + SEMI,
    )
    constant = _statement("constant", name("name") + pp.Opt(pp.Keyword("unit"))("unit") + SEMI)
    header = declare | rule | constant

    chunk_list = pp.Group(pp.DelimitedList(_chunk()))
    chunk_block = pp.Group(_chunk() + pp.ZeroOrMore(SEMI + _chunk()) + pp.Opt(SEMI))
    inverse = pp.Group(
        pp.Suppress(pp.Keyword("inverse")) + LBRACE
        + _assign("T") + _assign("X") + _assign("U") + pp.Opt(_assign("V")) + RBRACE
    )

    body = (
        header
        | _statement("equation", pp.Opt(name("name")) + EQ + _chunk()("rhs") + SEMI)
        | _statement("density", name("name") + EQ + _chunk()("rho") + SEMI)
        | _statement("conserved", name("name") + LBRACE + _assign("rho") + _assign("sigma") + RBRACE)
        | _statement(
            "transform",
            name("name") + LBRACE + _assign("T") + _assign("X") + _assign("U")
            + pp.Opt(_assign("Phi")) + pp.Opt(_assign("V")) + pp.Opt(inverse("inverse")) + RBRACE,
        )
        | _statement("operator", name("name") + EQ + LBRACK + chunk_list("coefficients") + RBRACK + SEMI)
        | _statement("gamma", name("name") + EQ + LBRACK + chunk_list("coefficients") + RBRACK + SEMI)
        | _statement("adjoint", name("name") + EQ + _chunk()("v") + SEMI)
        | _statement("basis", name("name") + LBRACE + chunk_block("terms") + RBRACE)
        | _statement("listing", name("name") + LBRACE + chunk_block("lines") + RBRACE)
        | _statement("expect", name("name") + EQ + _chunk()("value") + SEMI)
        | _statement("set", name("name") + EQ + (SIGNED_INTEGER | NAME)("value") + SEMI)
    )
    problem = pp.ZeroOrMore(body)
    problem.ignore(pp.python_style_comment)
    rest = pp.Empty().set_parse_action(lambda s, loc, toks: _Rest(loc))
    header_block = pp.ZeroOrMore(header) + rest
    header_block.ignore(pp.python_style_comment)
    return problem, header_block


@dataclass(frozen=True)
class _Rest:
    loc: int


_PROBLEM, _HEADER = _statement_grammar()


def parse_statements(text: str) -> List[Statement]:
    try:
        result = _PROBLEM.parse_string(text, parse_all=True)
    except pp.ParseException as exc:
        raise DslSyntaxError(f"syntax error: {exc.msg}", exc.lineno, exc.col) from None
    return list(result)


def apply_declarations(statements: List[Statement], table: SymbolTable, source: str) -> SymbolTable:
    """Apply declare/rule/constant statements and freeze the table."""
    for st in statements:
        try:
            if st.kind == "declare":
                table.declare(st.name, st.fields["params"])
            elif st.kind == "constant":
                table.constant(st.name, unit=bool(st.fields.get("unit")))
        except UnknownSymbolError as exc:
            raise UnknownSymbolError(exc.name, pp.lineno(st.loc, source), pp.col(st.loc, source)) from None
    for st in statements:
        if st.kind == "rule":
            try:
                table.rule(st.name, st.fields["param"], st.fields["target"])
            except UnknownSymbolError as exc:
                raise UnknownSymbolError(exc.name, pp.lineno(st.loc, source), pp.col(st.loc, source)) from None
    return table.freeze()


def parse_chunk(chunk: Chunk, table: SymbolTable, source: str) -> sympy.Expr:
    return parse_expression(chunk.text, table, source=source, offset=chunk.start)


def parse_expression_with_header(text: str, table: Optional[SymbolTable] = None) -> sympy.Expr:
    """Parse ``[declarations] expression``; declarations extend a copy of ``table``."""
    table = table or default_table()
    try:
        tokens = list(_HEADER.parse_string(text))
    except pp.ParseException as exc:
        raise DslSyntaxError(f"syntax error: {exc.msg}", exc.lineno, exc.col) from None
    statements, end = tokens[:-1], tokens[-1].loc
    if statements:
        table = apply_declarations(statements, table.derive(), text)
    return parse_expression(text[end:], table, source=text, offset=end)
