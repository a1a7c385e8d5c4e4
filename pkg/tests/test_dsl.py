from __future__ import annotations

from pathlib import Path

import pytest

from conservkit.dsl import parse_expression, parse_expression_with_header, parse_statements
from conservkit.errors import DslSyntaxError, PreconditionError, SymbolTableError, UnknownSymbolError
from conservkit.expr import equals, parse
from conservkit.problem import ProblemFile

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def test_precedence_and_unary_minus():
    assert parse("-u^2") == -parse("u*u")
    assert equals(parse("2*u + 3*u1/u"), 2 * parse("u") + 3 * parse("u1") / parse("u"))
    assert parse("u^-2") == parse("1/u^2")
    assert parse("u^(1/2)") == parse("sqrt(u)")


def test_dx_call():
    assert parse("Dx(u)") == parse("u1")
    assert parse("Dx(u, 2)") == parse("u2")
    assert equals(parse("Dx(u^2/2)"), parse("u*u1"))
    assert parse("Dx(u, 0)") == parse("u")


def test_syntax_error_reports_position():
    with pytest.raises(DslSyntaxError) as info:
        parse("u + * u1")
    assert info.value.line == 1
    assert info.value.column >= 3


def test_unknown_symbol_reports_position():
    with pytest.raises(UnknownSymbolError) as info:
        parse("u + w")
    assert info.value.name == "w"
    assert info.value.column == 5


def test_unknown_function():
    with pytest.raises(UnknownSymbolError):
        parse("g(u)")


def test_division_by_zero_and_bad_exponent():
    with pytest.raises(DslSyntaxError):
        parse("u/0")
    with pytest.raises(DslSyntaxError):
        parse("u^(1/0)")
    with pytest.raises(DslSyntaxError):
        parse("0^-1")


def test_wrong_arity():
    with pytest.raises(DslSyntaxError):
        parse("sqrt(u, u1)")
    with pytest.raises(DslSyntaxError):
        parse("Dx(u, 1, 2)")


def test_expression_with_header():
    e = parse_expression_with_header("declare g(u); rule d(g)/d(u) = gp; declare gp(u); u1*g(u)")
    names = {type(a).__name__ for a in e.args}
    assert "g" in names


def test_header_cycle_is_rejected():
    with pytest.raises(SymbolTableError):
        parse_expression_with_header("declare a(u); declare b(u); rule d(a)/d(u) = b; rule d(b)/d(u) = a; a(u)")


def test_constant_declaration():
    e = parse_expression_with_header("constant c; c*u")
    assert equals(e * 2, parse_expression_with_header("constant c; 2*c*u"))
    e = parse_expression_with_header("constant s unit; s*s*u")
    assert e == parse("u")


def test_statements_split():
    kinds = [st.kind for st in parse_statements("equation = u3; density r = u; expect char_r = 1;")]
    assert kinds == ["equation", "density", "expect"]


def test_problem_file_kdv():
    problem = ProblemFile.load(PROBLEMS / "kdv.ck")
    eq = problem.require_equation()
    assert eq.order == 3
    assert set(problem.densities) == {"rhoI", "rhoII", "rhoIII", "rhoIV"}
    assert "mass" in problem.conserved
    assert equals(problem.expects["char_rhoIV"], parse("x + t*u"))
    assert len(problem.conserved_vectors()) == 5


def test_problem_file_declarations_apply_before_bodies():
    problem = ProblemFile.parse(
        "equation = u3 + f(u)*u1;\n"
        "declare f(u); declare F(u); rule d(F)/d(u) = f;\n"
        "density m = u;\n"
    )
    assert problem.table.has_function("f")
    assert problem.require_equation().order == 3


def test_problem_file_listing_and_settings():
    problem = ProblemFile.load(PROBLEMS / "schwarzian.ck")
    assert len(problem.listings["printed"]) == 3
    assert problem.setting("jet_degree") == 3
    assert problem.setting("missing", 7) == 7
    spec = problem.transforms["schwarzian"]
    assert spec.inverse is not None
    assert spec.phi is not None


def test_problem_file_linear_items():
    problem = ProblemFile.load(PROBLEMS / "linear_e3.ck")
    op = problem.linear_operator()
    assert op.order == 3
    assert set(problem.adjoints) == {"one", "slope", "cubic"}
    assert set(problem.gamma_operators()) == {"identity", "upsilon"}
    with pytest.raises(PreconditionError):
        problem.linear_operator("missing")
    with pytest.raises(PreconditionError):
        problem.require_equation()


def test_problem_file_errors_carry_line_numbers():
    with pytest.raises(DslSyntaxError) as info:
        ProblemFile.parse("equation = u3;\ndensity r = u;\ndensity r = u^2;\n")
    assert info.value.line == 3
    with pytest.raises(DslSyntaxError) as info:
        ProblemFile.parse("equation = u3;\nequation = u3 + u1;\n")
    assert info.value.line == 2
    with pytest.raises(UnknownSymbolError) as info:
        ProblemFile.parse("equation = u3;\n\ndensity r = q*u;\n")
    assert info.value.line == 3
    with pytest.raises(DslSyntaxError):
        ProblemFile.parse("equation = u3\ndensity r = u;")


def test_equation_needs_order_two():
    with pytest.raises(PreconditionError):
        ProblemFile.parse("equation = u1;")


@pytest.mark.parametrize("path", sorted(PROBLEMS.glob("*.ck")), ids=lambda p: p.stem)
def test_shipped_problem_files_load(path):
    problem = ProblemFile.load(path)
    assert problem.summary() != "empty"


def test_comments_are_ignored():
    assert parse_expression("u1 # slope\n + u") == parse("u + u1")
