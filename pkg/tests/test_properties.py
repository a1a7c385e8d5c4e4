"""Randomized identities checked over many seeded draws."""

from __future__ import annotations

import math

import numpy as np
import pytest
import sympy

from conservkit.conslaw import (
    characteristic,
    conserved_vector,
    invert_dx,
    is_cosymmetry,
    minimal_density,
    reduce_once,
    verify,
)
from conservkit.corpus import load_cases
from conservkit.expr import T, X, _jet, equals, evaluate, is_zero, normalize, order
from conservkit.jet import DiffOp, EvolutionEquation, frechet, total_dt, total_dx, total_dx_power, variational
from conservkit.linear import LinearOperator, formal_adjoint, linear_flux
from conservkit.transform import ContactTransformation, prolong

SEEDS = 200


def random_poly(rng: np.random.Generator, max_order: int = 2, terms: int = 3, tx: bool = True) -> sympy.Expr:
    total = sympy.Integer(0)
    for _ in range(terms):
        coeff = sympy.Integer(int(rng.integers(1, 4))) * int(rng.choice([-1, 1]))
        monomial = sympy.Integer(1)
        for j in range(max_order + 1):
            monomial *= _jet(j) ** int(rng.integers(0, 3))
        if tx:
            monomial *= X ** int(rng.integers(0, 2)) * T ** int(rng.integers(0, 2))
        total += coeff * monomial
    return total


def draws(seed_base: int, count: int = SEEDS):
    for seed in range(count):
        yield np.random.default_rng(seed_base + seed)


def test_variational_kills_total_derivatives():
    for rng in draws(0):
        e = random_poly(rng)
        assert is_zero(variational(total_dx(e))), e


def test_total_derivatives_commute(kdv):
    for rng in draws(1000):
        e = random_poly(rng, terms=2)
        assert equals(total_dt(total_dx(e), kdv), total_dx(total_dt(e, kdv))), e


def test_adjoint_is_an_involution():
    for rng in draws(2000):
        n = int(rng.integers(0, 4))
        op = DiffOp(tuple(random_poly(rng, max_order=1, terms=2) for _ in range(n + 1)))
        assert op.adjoint().adjoint().equals(op), str(op)


def test_invert_dx_round_trip():
    for rng in draws(3000):
        g = total_dx(random_poly(rng, tx=False))
        assert equals(total_dx(invert_dx(g)), g), g


def test_reduce_once_lowers_order_and_keeps_the_law(kdv):
    for rng in draws(4000):
        gauge = random_poly(rng, max_order=1, terms=2, tx=False)
        a, b = (int(rng.integers(1, 5)) for _ in range(2))
        rho = a * _jet(0) + b * _jet(0) ** 2 / 2 + total_dx(gauge)
        cv = conserved_vector(kdv, rho)
        if order(cv.rho) == 0:
            continue
        reduced = reduce_once(cv)
        assert order(reduced.rho) < order(cv.rho), rho
        assert verify(reduced), rho


def test_frechet_matches_central_differences():
    h = 1e-4
    for rng in draws(5000):
        F = random_poly(rng)
        L = frechet(F)
        for _ in range(5):
            point = {_jet(j): float(rng.uniform(0.5, 2.0)) for j in range(3)}
            point.update({X: float(rng.uniform(0.5, 2.0)), T: float(rng.uniform(0.5, 2.0))})
            direction = {_jet(j): float(rng.uniform(-1.0, 1.0)) for j in range(3)}
            plus = {s: v + h * direction.get(s, 0.0) for s, v in point.items()}
            minus = {s: v - h * direction.get(s, 0.0) for s, v in point.items()}
            numeric = (evaluate(F, plus) - evaluate(F, minus)) / (2 * h)
            exact = sum(evaluate(L.coefficient(j), point) * direction[_jet(j)] for j in range(3))
            scale = max(1.0, abs(evaluate(F, point)))
            assert numeric == pytest.approx(exact, abs=1e-5 * scale, rel=1e-6), F


def random_tx(rng: np.random.Generator, degree: int = 1) -> sympy.Expr:
    return sum(
        int(rng.integers(-2, 3)) * X**i * T**j for i in range(degree + 1) for j in range(degree + 1 - i)
    ) + sympy.Integer(0)


def random_radical(rng: np.random.Generator) -> sympy.Expr:
    return _jet(int(rng.integers(0, 2))) ** sympy.Rational(int(rng.integers(-3, 4)), 2)


def test_normalize_is_idempotent():
    for rng in draws(6000):
        numerator = random_poly(rng, max_order=1, terms=2) * random_radical(rng)
        denominator = random_poly(rng, max_order=1, terms=2)
        if normalize(denominator) == 0:
            continue
        once = normalize(numerator / denominator)
        assert normalize(once) == once, once


def test_equals_is_an_equivalence():
    for rng in draws(7000, count=50):
        a = random_poly(rng, max_order=1) * random_radical(rng)
        d = random_poly(rng, max_order=1, terms=2)
        if normalize(d) == 0:
            continue
        b = sympy.expand(a * d) / d
        c = sympy.expand(a * d**2) / d**2
        assert equals(a, a)
        assert equals(a, b) and equals(b, a), (a, d)
        assert equals(b, c) and equals(a, c), (a, d)
        assert not equals(a, a + 1)


def test_adjoint_pairing_is_a_total_derivative():
    for rng in draws(8000, count=50):
        n = int(rng.integers(0, 3))
        op = DiffOp(tuple(random_poly(rng, max_order=1, terms=2) for _ in range(n + 1)))
        a = random_poly(rng, max_order=1, terms=2)
        b = random_poly(rng, max_order=1, terms=2)
        pairing = a * op.apply(b) - b * op.adjoint().apply(a)
        assert is_zero(variational(pairing)), (str(op), a, b)


def _random_linear_operator(rng: np.random.Generator) -> LinearOperator:
    n = int(rng.integers(2, 5))
    coefficients = [random_tx(rng) for _ in range(n)]
    coefficients.append(random_tx(rng) + int(rng.choice([-3, -2, -1, 1, 2, 3])) * (1 + X**2))
    return LinearOperator(tuple(coefficients))


def test_formal_adjoint_is_an_involution():
    for rng in draws(9000, count=50):
        op = _random_linear_operator(rng)
        twice = formal_adjoint(formal_adjoint(op))
        assert twice.op.equals(op.op), str(op)


def test_linear_flux_on_polynomial_adjoint_solutions():
    for rng in draws(10000, count=20):
        n = int(rng.integers(2, 5))
        lower = tuple(int(rng.integers(-2, 3)) for _ in range(n - 1))
        op = LinearOperator((0,) + lower + (int(rng.choice([-1, 1, 2])),))
        dagger = formal_adjoint(op).op
        term = sum(int(rng.integers(-2, 3)) * X**i for i in range(4)) + X**4
        v = sympy.Integer(0)
        k = 0
        while not is_zero(term):
            v += (-T) ** k / math.factorial(k) * term
            term = dagger.apply(term)
            k += 1
        cv = linear_flux(op, v)
        assert verify(cv), (str(op), v)


def test_prolongation_order_is_bounded():
    t, x, u, u1 = T, X, _jet(0), _jet(1)
    legendre = ContactTransformation.create(t, u1, x * u1 - u, name="legendre")
    for k in range(4):
        assert order(prolong(legendre, k)) <= k + 1
    for rng in draws(11000, count=20):
        a, b = (int(rng.choice([-2, -1, 1, 2])) for _ in range(2))
        p, q = (int(rng.integers(2, 4)) for _ in range(2))
        ct = ContactTransformation.create(t, x + a * u**p, u + b * x**q, name="point")
        for k in range(4):
            assert order(prolong(ct, k)) <= k, (a, b, p, q, k)


def test_even_order_densities_reduce_to_half_the_order():
    for rng in draws(12000, count=20):
        H = int(rng.choice([-2, -1, 1, 2])) * _jet(2) + random_poly(rng, max_order=1, terms=2, tx=False)
        eq = EvolutionEquation.from_rhs(total_dx_power(H, 2), name="even")
        a, b = (int(rng.integers(1, 4)) for _ in range(2))
        rho = a * _jet(0) + b * X * _jet(0) + total_dx(random_poly(rng, max_order=1, terms=2, tx=False))
        record = minimal_density(conserved_vector(eq, rho))
        assert record.trivial or record.density_order <= eq.order // 2, (H, rho)


def test_verified_corpus_laws_have_self_adjoint_characteristics():
    for case in load_cases():
        if case.kind != "verify":
            continue
        problem = case.load()
        eq = problem.require_equation()
        for cv in problem.conserved_vectors({}):
            if not verify(cv):
                continue
            gamma = characteristic(cv)
            assert is_cosymmetry(eq, gamma), (case.name, cv.name)
            assert frechet(gamma).is_self_adjoint(), (case.name, cv.name)
