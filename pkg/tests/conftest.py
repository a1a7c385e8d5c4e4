from __future__ import annotations

import numpy as np
import pytest

from conservkit.dsl import parse_expression
from conservkit.expr import SymbolTable
from conservkit.jet import EvolutionEquation
from conservkit.linear import LinearOperator
from conservkit.settings import use_settings
from conservkit.storage import proof_log


def kdv_type_table() -> SymbolTable:
    table = SymbolTable()
    for name in ("f", "fp", "fpp", "fhat", "fcheck"):
        table.declare(name, ["u"])
    table.rule("fcheck", "u", "fhat")
    table.rule("fhat", "u", "f")
    table.rule("f", "u", "fp")
    table.rule("fp", "u", "fpp")
    return table.freeze()


@pytest.fixture(scope="session")
def fn_table() -> SymbolTable:
    return kdv_type_table()


@pytest.fixture
def P(fn_table):
    """Parser bound to the KdV-type symbol table."""

    def parse(text: str):
        return parse_expression(text, fn_table)

    return parse


@pytest.fixture(scope="session")
def kdv() -> EvolutionEquation:
    return EvolutionEquation.from_rhs(parse_expression("u3 + u*u1"), name="kdv")


@pytest.fixture(scope="session")
def kdv_type(fn_table) -> EvolutionEquation:
    return EvolutionEquation.from_rhs(parse_expression("u3 + f(u)*u1", fn_table), name="kdv-type")


@pytest.fixture(scope="session")
def harry_dym() -> EvolutionEquation:
    return EvolutionEquation.from_rhs(parse_expression("u^3*u3"), name="harry dym")


@pytest.fixture(scope="session")
def schwarzian() -> EvolutionEquation:
    return EvolutionEquation.from_rhs(parse_expression("u3 - 3*u2^2/(2*u1)"), name="schwarzian kdv")


@pytest.fixture(scope="session")
def e3() -> LinearOperator:
    return LinearOperator((0, 0, 0, 1))


@pytest.fixture(scope="session")
def e4() -> LinearOperator:
    return LinearOperator((parse_expression("x"), 0, 0, 1))


@pytest.fixture(scope="session")
def heat() -> LinearOperator:
    return LinearOperator((0, 0, 1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20080901)


@pytest.fixture
def no_guard():
    with use_settings(guard=False) as settings:
        yield settings


@pytest.fixture
def log():
    with proof_log() as active:
        yield active
