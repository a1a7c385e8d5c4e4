from __future__ import annotations

import pytest
import sympy

from conservkit.errors import (
    JetOverflowError,
    MissingDerivativeRule,
    NoClosedFormError,
    PreconditionError,
    SymbolTableError,
    UnknownSymbolError,
)
from conservkit.expr import (
    EPS,
    PROBABILISTIC,
    SYMBOLIC,
    T,
    X,
    SymbolTable,
    _jet,
    antiderivative,
    compare,
    equals,
    evaluate,
    in_rational_fragment,
    is_zero,
    jet,
    normalize,
    order,
    parse,
    partial,
    to_dsl,
)
from conservkit.sampling import draw_point, probably_equal
from conservkit.settings import use_settings

u, u1, u2, u3 = (_jet(j) for j in range(4))


def test_parse_harry_dym_rhs():
    assert parse("u^3 * u3") == u**3 * u3


def test_parse_zero_and_kdv():
    assert parse("0") == 0
    assert parse("u3 + u*u1") == u3 + u * u1


def test_normalize_collapses():
    assert normalize(u1 * u - u * u1) == 0
    assert normalize(u**2 * u**-2) == 1
    assert normalize(2 * (u2 / 2)) == u2


def test_normalize_is_idempotent():
    e = parse("(u1^2 - u^2)/(u1 - u) + x/(t*u)")
    assert normalize(normalize(e)) == normalize(e)


def test_unit_constant_squares_to_one():
    assert normalize(EPS**2 * u) == u
    assert normalize(EPS**3) == EPS
    assert equals(parse("eps*eps*u1"), u1)


def test_equals_expanded_square():
    assert equals(parse("(u + u1)^2"), parse("u^2 + 2*u*u1 + u1^2"))
    assert not equals(u1, u2)


def test_compare_symbolic_inside_fragment():
    verdict = compare(parse("(u^2 - 1)/(u - 1)"), parse("u + 1"))
    assert verdict.equal
    assert verdict.method == SYMBOLIC


def test_compare_probabilistic_outside_fragment():
    verdict = compare(parse("sqrt(u1^2 + 2*u*u1 + u^2)"), parse("u + u1"))
    assert verdict.equal
    assert verdict.method == PROBABILISTIC
    verdict = compare(parse("sqrt(u^2 + 1)"), parse("u"))
    assert not verdict.equal


def test_compare_nested_function_is_flagged(P):
    left = P("fhat(eps*sqrt(2*u))^2")
    right = P("fhat(eps*sqrt(2*u))*fhat(eps*sqrt(2*u))")
    assert equals(left, right)
    assert not in_rational_fragment(P("fhat(eps*sqrt(2*u))") - P("fhat(u)"))
    verdict = compare(P("Dx(fcheck(eps*sqrt(2*u)))"), P("fhat(eps*sqrt(2*u))*eps*u1/sqrt(2*u)"))
    assert verdict.equal
    assert verdict.method in (SYMBOLIC, PROBABILISTIC)


def test_is_zero_and_fragment():
    assert is_zero(parse("u1/u - u1*u^-1"))
    assert in_rational_fragment(parse("x*u^-2 + t/u1"))
    assert in_rational_fragment(parse("u^(1/2) + x^(-3/2)*u1"))
    assert not in_rational_fragment(parse("(u^2 + 1)^(1/2)"))


def test_radicals_of_jet_variables_are_decided_symbolically():
    # Harry Dym: D_x^2 u^(-1/2) expanded by hand
    lhs = parse("Dx(u^(-1/2), 2)")
    rhs = parse("3/4*u^(-5/2)*u1^2 - 1/2*u^(-3/2)*u2")
    verdict = compare(lhs, rhs)
    assert verdict.equal
    assert verdict.method == SYMBOLIC
    assert is_zero(parse("(u - 1)/(u^(1/2) - 1) - u^(1/2) - 1"))
    verdict = compare(parse("u^(1/2)*u^(1/3)"), parse("u^(5/6) + u1"))
    assert not verdict.equal
    assert verdict.method == SYMBOLIC


def test_jet_overflow():
    with use_settings(n_max=4):
        with pytest.raises(JetOverflowError):
            jet(5)
        with pytest.raises(JetOverflowError):
            parse("u5")
    assert jet(5) == _jet(5)


def test_partial_and_order(P):
    assert partial(parse("u^3*u3"), "u3") == u**3
    assert partial(parse("x*u^2"), "x") == u**2
    assert partial(P("fcheck(u)"), "u") == P("fhat(u)")
    assert order(parse("u^3*u3")) == 3
    assert order(parse("x + t")) == 0
    assert order(parse("u1 + u3 - u3")) == 1


def test_missing_derivative_rule():
    table = SymbolTable()
    table.declare("g", ["u"])
    table.freeze()
    e = parse("g(u1)", table)
    with pytest.raises(MissingDerivativeRule):
        partial(e, "u1")


def test_symbol_table_rejects_cycles_and_arity():
    table = SymbolTable()
    table.declare("a", ["u"])
    table.declare("b", ["u"])
    table.rule("a", "u", "b")
    table.rule("b", "u", "a")
    with pytest.raises(SymbolTableError):
        table.freeze()
    table = SymbolTable()
    table.declare("a", ["u"])
    table.declare("h", ["u", "x"])
    table.rule("a", "u", "h")
    with pytest.raises(SymbolTableError):
        table.freeze()
    with pytest.raises(SymbolTableError):
        SymbolTable().declare("u2", ["u"])
    with pytest.raises(UnknownSymbolError):
        SymbolTable().rule("missing", "u", "other")


def test_frozen_table_rejects_changes(fn_table):
    with pytest.raises(SymbolTableError):
        fn_table.declare("late", ["u"])
    derived = fn_table.derive()
    derived.declare("late", ["u"])
    assert derived.freeze().has_function("late")
    assert not fn_table.has_function("late")


def test_antiderivative_power_log_and_rules(P):
    assert antiderivative(u**2, u) == u**3 / 3
    assert equals(antiderivative(u**-2, u), -1 / u)
    assert antiderivative(1 / u, u) == sympy.log(u)
    assert antiderivative(P("f(u)"), u) == P("fhat(u)")
    assert equals(antiderivative(P("u1^2*fp(u)"), u), P("u1^2*f(u)"))


def test_antiderivative_by_parts(P):
    result = antiderivative(P("u*f(u)"), u)
    assert equals(result, P("u*fhat(u) - fcheck(u)"))
    assert equals(antiderivative(P("fhat(u)*f(u)"), u), P("fhat(u)^2/2"))


def test_antiderivative_no_closed_form(P):
    with pytest.raises(NoClosedFormError):
        antiderivative(P("fpp(u)*fhat(u)"), u)
    with pytest.raises(NoClosedFormError):
        antiderivative(P("u1*f(u^2)"), u)


def test_to_dsl_round_trip():
    for text in ("u^3*u3", "x*u^(-2)", "u^(-1/2)", "-u1^2/2 + u^3/6", "eps*sqrt(2*u)"):
        e = parse(text)
        assert normalize(parse(to_dsl(e))) == normalize(e)


def test_evaluate():
    assert evaluate(parse("u^2 + x"), {"u": 3, "x": 1}) == pytest.approx(10.0)
    assert evaluate(parse("t*x"), {T: 2, X: 0.5}) == pytest.approx(1.0)
    with pytest.raises(ZeroDivisionError):
        evaluate(parse("1/(u - 1)"), {"u": 1})


def test_guard_off_skips_sampling_inside_fragment(no_guard, log):
    verdict = compare(parse("u^2"), parse("u*u1"), label="guard off")
    assert not verdict.equal
    assert verdict.method == SYMBOLIC
    assert [entry["summary"] for entry in log.entries] == ["guard off"]


def test_probably_equal_with_seeded_rng(rng):
    a = parse("sqrt(u1^2 + 2*u*u1 + u^2)")
    assert probably_equal(a, parse("u + u1"), rng=rng)
    assert probably_equal(parse("sqrt(u^2 + 1)"), parse("u"), rng=rng) is False


def test_draw_point_values(rng):
    point = draw_point([parse("eps*u + x")], rng)
    assert point.values[EPS] in (1, -1)
    assert all(v > 0 for s, v in point.values.items() if s != EPS)


def test_evaluate_errors():
    with pytest.raises(PreconditionError):
        evaluate(parse("u + x"), {"u": 1})
    with pytest.raises(ValueError):
        evaluate(parse("sqrt(u - 5)"), {"u": 1})
