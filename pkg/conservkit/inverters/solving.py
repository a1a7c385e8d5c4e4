from __future__ import annotations

import logging
from typing import Dict, List

import sympy

from conservkit.errors import InversionError
from conservkit.expr import EPS, T, X, _jet, normalize, to_dsl
from conservkit.inverters.base import InverseMap

logger = logging.getLogger(__name__)


class SolvingInverter:
    """Solves tilde-t = T, tilde-x = X, tilde-u = U, tilde-u1 = V for (t, x, u, u1).

    A pair of roots differing by a branch choice is merged into one expression
    with the unit constant ``eps`` selecting the branch.
    """

    name = "solve"

    def invert(self, ct) -> InverseMap:
        originals = [T, X, _jet(0), _jet(1)]
        unknowns = list(sympy.symbols("t_ x_ u_ u1_"))
        tildes = list(sympy.symbols("tt xt ut u1t", positive=True))
        plain = dict(zip(originals, unknowns))
        forward = [ct.T, ct.X, ct.U, ct.V]
        equations = [sympy.together(f.xreplace(plain) - s) for f, s in zip(forward, tildes)]
        equations = [sympy.numer(e) for e in equations]
        try:
            solutions = sympy.solve(equations, unknowns, dict=True)
        except (NotImplementedError, ValueError) as exc:
            raise InversionError(f"{ct.name}: cannot solve for the inverse map ({exc})") from None
        solutions = [s for s in solutions if all(v in s for v in unknowns)]
        solutions = [s for s in solutions if not self._degenerate(s, unknowns)]
        if not solutions:
            raise InversionError(f"{ct.name}: no inverse map found by solving")
        if len(solutions) > 2:
            raise InversionError(f"{ct.name}: {len(solutions)} inverse branches; supply the inverse explicitly")
        rename = dict(zip(tildes, originals))
        values: List[sympy.Expr] = []
        for v in unknowns:
            if len(solutions) == 1:
                value = solutions[0][v]
            else:
                a, b = solutions[0][v], solutions[1][v]
                value = (a + b) / 2 + EPS * (a - b) / 2
            values.append(normalize(value.xreplace(rename)))
        logger.info("solved inverse of %s: %s", ct.name, ", ".join(to_dsl(v) for v in values))
        return InverseMap(*values)

    @staticmethod
    def _degenerate(solution: Dict[sympy.Symbol, sympy.Expr], unknowns) -> bool:
        return any(solution[v].has(sympy.zoo, sympy.nan) for v in unknowns)
