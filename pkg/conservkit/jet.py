"""Total derivatives, variational and Fréchet derivatives, and linear differential operators."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Sequence, Tuple, Union

import sympy

from .errors import JetOverflowError, PreconditionError
from .expr import (
    T,
    X,
    Expr,
    ExprLike,
    _jet,
    as_expr,
    is_zero,
    jet_indices,
    max_jet,
    normalize,
    order,
    partial,
    to_dsl,
)
from .settings import get_settings

logger = logging.getLogger(__name__)


def _check_room(top: int, extra: int) -> None:
    n_max = get_settings().n_max
    if top + extra > n_max:
        raise JetOverflowError(f"jet index {top + extra} exceeds N_max = {n_max}")


def total_dx(e: ExprLike) -> Expr:
    e = as_expr(e)
    _check_room(max_jet(e), 1)
    result = sympy.diff(e, X)
    for j in jet_indices(e):
        result += _jet(j + 1) * sympy.diff(e, _jet(j))
    return normalize(result)


def total_dx_power(e: ExprLike, k: int) -> Expr:
    result = as_expr(e)
    for _ in range(k):
        result = total_dx(result)
    return result


@dataclass(frozen=True)
class EvolutionEquation:
    """u_t = F(t, x, u, ..., u_n) with n >= 2 and F depending on u_n."""

    rhs: Expr
    order: int
    name: str = "eq"
    _prolongations: Dict[int, Expr] = field(default_factory=dict, compare=False, repr=False, hash=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, compare=False, repr=False, hash=False)

    @classmethod
    def from_rhs(cls, rhs: ExprLike, name: str = "eq") -> "EvolutionEquation":
        rhs = normalize(as_expr(rhs))
        n = order(rhs)
        if n < 2 or is_zero(partial(rhs, _jet(n))):
            raise PreconditionError(f"{name}: evolution equation needs order n >= 2, got {n}")
        return cls(rhs, n, name)

    def prolongation(self, j: int) -> Expr:
        """D_x^j F, cached per equation."""
        with self._lock:
            cached = self._prolongations.get(j)
            if cached is None:
                cached = self.rhs if j == 0 else total_dx(self.prolongation(j - 1))
                self._prolongations[j] = cached
            return cached

    def __str__(self) -> str:
        return f"u_t = {to_dsl(self.rhs)}"


def total_dt(e: ExprLike, eq: EvolutionEquation) -> Expr:
    e = as_expr(e)
    _check_room(max_jet(e), eq.order)
    result = sympy.diff(e, T)
    for j in jet_indices(e):
        result += eq.prolongation(j) * sympy.diff(e, _jet(j))
    return normalize(result)


def variational(e: ExprLike) -> Expr:
    """Euler operator sum_i (-D_x)^i d/du_i, evaluated in Horner form."""
    e = as_expr(e)
    top = max_jet(e)
    if top < 0:
        return sympy.Integer(0)
    acc = sympy.diff(e, _jet(top))
    for i in range(top - 1, -1, -1):
        acc = sympy.diff(e, _jet(i)) - total_dx(acc)
    return normalize(acc)


def frechet(e: ExprLike) -> "DiffOp":
    e = as_expr(e)
    top = max_jet(e)
    return DiffOp(tuple(sympy.diff(e, _jet(i)) for i in range(top + 1)))


@dataclass(frozen=True)
class DiffOp:
    """sum_i c_i D_x^i with coefficients to the left of the derivatives."""

    coefficients: Tuple[Expr, ...] = ()

    def __post_init__(self) -> None:
        coeffs = [normalize(c) for c in self.coefficients]
        while coeffs and is_zero(coeffs[-1]):
            coeffs.pop()
        n_max = get_settings().n_max
        if len(coeffs) - 1 > n_max:
            raise JetOverflowError(f"operator order {len(coeffs) - 1} exceeds N_max = {n_max}")
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def zero(cls) -> "DiffOp":
        return cls(())

    @classmethod
    def identity(cls) -> "DiffOp":
        return cls((sympy.Integer(1),))

    @classmethod
    def dx(cls, k: int = 1) -> "DiffOp":
        return cls(tuple([sympy.Integer(0)] * k + [sympy.Integer(1)]))

    @classmethod
    def multiplication(cls, c: ExprLike) -> "DiffOp":
        return cls((as_expr(c),))

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def coefficient(self, i: int) -> Expr:
        return self.coefficients[i] if 0 <= i < len(self.coefficients) else sympy.Integer(0)

    def apply(self, e: ExprLike) -> Expr:
        derivative = as_expr(e)
        total = sympy.Integer(0)
        for i, c in enumerate(self.coefficients):
            if i:
                derivative = total_dx(derivative)
            total += c * derivative
        return normalize(total)

    __call__ = apply

    def compose(self, other: "DiffOp") -> "DiffOp":
        if self.is_zero or other.is_zero:
            return DiffOp.zero()
        n_max = get_settings().n_max
        if self.order + other.order > n_max:
            raise JetOverflowError(f"composed order {self.order + other.order} exceeds N_max = {n_max}")
        derivatives: List[List[Expr]] = []
        for d in other.coefficients:
            chain = [d]
            for _ in range(self.order):
                chain.append(total_dx(chain[-1]))
            derivatives.append(chain)
        result = [sympy.Integer(0)] * (self.order + other.order + 1)
        for i, c in enumerate(self.coefficients):
            if c == 0:
                continue
            for j, chain in enumerate(derivatives):
                for s in range(i + 1):
                    result[i - s + j] += comb(i, s) * c * chain[s]
        return DiffOp(tuple(result))

    def adjoint(self) -> "DiffOp":
        """sum_i (-D_x)^i o c_i in right-normal form."""
        result = [sympy.Integer(0)] * len(self.coefficients)
        for i, c in enumerate(self.coefficients):
            chain = [c]
            for _ in range(i):
                chain.append(total_dx(chain[-1]))
            sign = -1 if i % 2 else 1
            for s in range(i + 1):
                result[s] += sign * comb(i, s) * chain[i - s]
        return DiffOp(tuple(result))

    def add(self, other: "DiffOp") -> "DiffOp":
        size = max(len(self.coefficients), len(other.coefficients))
        return DiffOp(tuple(self.coefficient(i) + other.coefficient(i) for i in range(size)))

    def scale(self, c: ExprLike) -> "DiffOp":
        c = as_expr(c)
        return DiffOp(tuple(c * a for a in self.coefficients))

    def neg(self) -> "DiffOp":
        return self.scale(-1)

    def sub(self, other: "DiffOp") -> "DiffOp":
        return self.add(other.neg())

    def power(self, k: int) -> "DiffOp":
        result = DiffOp.identity()
        for _ in range(k):
            result = result.compose(self)
        return result

    def partial_t(self) -> "DiffOp":
        return DiffOp(tuple(sympy.diff(c, T) for c in self.coefficients))

    def equals(self, other: "DiffOp") -> bool:
        return self.sub(other).is_zero

    def is_self_adjoint(self) -> bool:
        return self.equals(self.adjoint())

    def is_skew_adjoint(self) -> bool:
        return self.add(self.adjoint()).is_zero

    __add__ = add
    __sub__ = sub
    __neg__ = neg

    def __mul__(self, other: Union["DiffOp", ExprLike]) -> "DiffOp":
        if isinstance(other, DiffOp):
            return self.compose(other)
        return self.compose(DiffOp.multiplication(other))

    def __rmul__(self, other: ExprLike) -> "DiffOp":
        return self.scale(other)

    def __str__(self) -> str:
        terms = []
        for i in range(self.order, -1, -1):
            c = self.coefficients[i]
            if c == 0:
                continue
            power = "" if i == 0 else ("Dx" if i == 1 else f"Dx^{i}")
            if not power:
                terms.append(to_dsl(c))
            elif c == 1:
                terms.append(power)
            elif c == -1:
                terms.append(f"-{power}")
            else:
                text = to_dsl(c)
                if c.is_Add:
                    text = f"({text})"
                terms.append(f"{text}*{power}")
        return " + ".join(terms).replace("+ -", "- ") if terms else "0"


def op_apply(P: DiffOp, e: ExprLike) -> Expr:
    return P.apply(e)


def op_compose(P: DiffOp, Q: DiffOp) -> DiffOp:
    return P.compose(Q)


def op_add(P: DiffOp, Q: DiffOp) -> DiffOp:
    return P.add(Q)


def op_scale(P: DiffOp, c: ExprLike) -> DiffOp:
    return P.scale(c)


def op_adjoint(P: DiffOp) -> DiffOp:
    return P.adjoint()
