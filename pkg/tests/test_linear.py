from __future__ import annotations

import numpy as np
import pytest
import sympy

from conservkit.conslaw import minimal_density, verify
from conservkit.errors import PreconditionError
from conservkit.expr import X, equals, parse
from conservkit.jet import EvolutionEquation
from conservkit.linear import (
    GammaOperator,
    LinearOperator,
    as_linear,
    check_gamma,
    determining_system,
    formal_adjoint,
    is_adjoint_solution,
    linear_flux,
    quadratic_cv,
    self_adjoint_part,
    solve_determining,
    span_contains,
    split_affine,
    top_residual_shape,
    upsilon_gamma,
)
from conservkit.settings import use_settings
from conservkit.storage import proof_log


def test_operator_preconditions():
    with pytest.raises(PreconditionError):
        LinearOperator((0, 1))
    with pytest.raises(PreconditionError):
        LinearOperator((parse("u"), 0, 1))
    assert LinearOperator((0, 0, 1, 0)).order == 2


def test_split_affine():
    op, source = split_affine(EvolutionEquation.from_rhs(parse("u3 + x*u + 1")))
    assert op.coefficients == (parse("x"), 0, 0, 1)
    assert source == 1
    assert as_linear(EvolutionEquation.from_rhs(parse("u3 + x*u + 1"))) is None
    assert as_linear(EvolutionEquation.from_rhs(parse("u3 + x*u"))).order == 3


def test_nonlinear_equation_is_rejected(kdv):
    assert split_affine(kdv) == (None, None)
    assert as_linear(kdv) is None


def test_formal_adjoint(e3, e4):
    assert formal_adjoint(e3).coefficients == (0, 0, 0, -1)
    assert formal_adjoint(e4).coefficients == (parse("x"), 0, 0, -1)


@pytest.mark.parametrize("v", ["1", "x", "x^2", "x^3 + 6*t"])
def test_adjoint_solutions(e3, v):
    assert is_adjoint_solution(e3, parse(v))


def test_adjoint_non_solution(e3):
    assert not is_adjoint_solution(e3, parse("x^3"))
    with pytest.raises(PreconditionError):
        is_adjoint_solution(e3, parse("u"))
    with pytest.raises(PreconditionError):
        linear_flux(e3, parse("x^3"))


@pytest.mark.parametrize("v", ["1", "x", "x^2", "x^3 + 6*t"])
def test_linear_flux_verifies(e3, v):
    cv = linear_flux(e3, parse(v))
    assert verify(cv)
    assert equals(cv.rho, parse(v) * parse("u"))


def test_linear_flux_values(e3):
    assert equals(linear_flux(e3, 1).sigma, parse("-u2"))
    assert equals(linear_flux(e3, parse("x")).sigma, parse("u1 - x*u2"))


def test_top_residual_shape(e3, e4):
    for op in (e3, e4):
        system = determining_system(op, 2)
        assert equals(system.coefficient_of(4), top_residual_shape(op, 2))
        assert system.coefficient_of(5) == 0
    g2 = sympy.Function("g2")(parse("t"), parse("x"))
    assert equals(top_residual_shape(e3, 2), -3 * sympy.diff(g2, parse("x")))


def test_determining_system_to_dict(e3):
    data = determining_system(e3, 1).to_dict()
    assert data["r"] == 1
    assert all("monomial" in eq for eq in data["equations"])


def test_solve_determining_e3(e3):
    solutions = solve_determining(e3, 2, 2)
    assert any(s.jet_dependent for s in solutions)
    assert span_contains(solutions, GammaOperator((1,)), 0, 2, 2)
    assert span_contains(solutions, upsilon_gamma(1, 0), 0, 2, 2)
    assert span_contains(solutions, GammaOperator(()), 1, 2, 2)
    assert not span_contains(solutions, GammaOperator((parse("x"),)), 0, 2, 2)


def test_solve_determining_heat(heat):
    for r in (0, 1, 2):
        assert not any(s.jet_dependent for s in solve_determining(heat, r, 4))


def _random_even_operator(rng: np.random.Generator) -> LinearOperator:
    n = int(rng.choice([2, 4]))
    lower = [int(rng.integers(-2, 3)) + int(rng.integers(-1, 2)) * X for _ in range(n)]
    return LinearOperator((*lower, sympy.Integer(int(rng.choice([1, 2, 3])))))


@pytest.mark.parametrize("seed", range(5))
def test_random_even_order_operators_have_no_jet_dependent_cosymmetries(seed):
    op = _random_even_operator(np.random.default_rng(seed))
    for r in (0, 1, 2):
        assert not any(s.jet_dependent for s in solve_determining(op, r, 3)), str(op)


@pytest.mark.slow
def test_solve_determining_e4_has_no_jet_dependent_cosymmetries(e4):
    assert not any(s.jet_dependent for s in solve_determining(e4, 4, 8))


def test_check_gamma(e3):
    with proof_log() as log:
        assert check_gamma(e3, GammaOperator((1,)))
        assert check_gamma(e3, upsilon_gamma(1, 0))
        assert not check_gamma(e3, GammaOperator((parse("x"),)))
    assert len(log) == 3
    assert [entry["meta"]["verdict"] for entry in log.entries] == [True, True, False]


def test_self_adjoint_part():
    assert self_adjoint_part(GammaOperator((0, 1))).is_zero
    part = self_adjoint_part(GammaOperator((parse("x"), 1)))
    assert part.coefficients == (parse("x"),)


@pytest.mark.parametrize("l,m", [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)])
def test_quadratic_laws(e3, l, m):
    G = upsilon_gamma(l, m)
    assert check_gamma(e3, G)
    record = minimal_density(quadratic_cv(e3, G))
    assert record.density_order == l + m


def test_quadratic_cv_preconditions(e3):
    with pytest.raises(PreconditionError):
        quadratic_cv(e3, GammaOperator((0, 1)))
    with pytest.raises(PreconditionError):
        quadratic_cv(e3, GammaOperator((parse("x"),)))


def test_upsilon_gamma():
    assert upsilon_gamma(0, 0).coefficients == (1,)
    assert upsilon_gamma(0, 2).coefficients == (0, 0, 0, 0, 1)
    assert upsilon_gamma(1, 0).coefficients == (parse("x"), 0, parse("3*t"))
    with pytest.raises(ValueError):
        upsilon_gamma(-1, 0)


def test_solve_determining_with_workers_matches_serial(e3):
    serial = solve_determining(e3, 1, 1)
    with use_settings(workers=4):
        threaded = solve_determining(e3, 1, 1)
    assert [s.vector for s in threaded] == [s.vector for s in serial]
