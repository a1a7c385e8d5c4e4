from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Protocol

import sympy

if TYPE_CHECKING:
    from conservkit.transform import ContactTransformation


@dataclass(frozen=True)
class InverseMap:
    """Original t, x, u and u_x written in the transformed variables."""

    T: sympy.Expr
    X: sympy.Expr
    U: sympy.Expr
    V: Optional[sympy.Expr] = None


class Inverter(Protocol):
    name: str

    def invert(self, ct: "ContactTransformation") -> InverseMap:
        ...
