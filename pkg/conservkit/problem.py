"""Problem files: declarations, one equation and named items."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pyparsing as pp

from .conslaw import ConservedVector, conserved_vector
from .dsl import Chunk, Statement, apply_declarations, parse_chunk, parse_statements
from .errors import DslSyntaxError, NoClosedFormError, NotADensityError, PreconditionError
from .expr import Expr, SymbolTable, default_table, to_dsl
from .inverters.base import InverseMap
from .jet import EvolutionEquation
from .linear import GammaOperator, LinearOperator
from .transform import ContactTransformation

logger = logging.getLogger(__name__)

HEADER_KINDS = ("declare", "rule", "constant")


@dataclass(frozen=True)
class TransformSpec:
    name: str
    T: Expr
    X: Expr
    U: Expr
    phi: Optional[Expr] = None
    V: Optional[Expr] = None
    inverse: Optional[InverseMap] = None

    def build(self) -> ContactTransformation:
        return ContactTransformation.create(
            self.T, self.X, self.U, name=self.name, phi=self.phi, inverse=self.inverse, V=self.V
        )


@dataclass
class ProblemFile:
    source: str
    table: SymbolTable
    path: Optional[Path] = None
    equation: Optional[EvolutionEquation] = None
    densities: Dict[str, Expr] = field(default_factory=dict)
    conserved: Dict[str, Tuple[Expr, Expr]] = field(default_factory=dict)
    transforms: Dict[str, TransformSpec] = field(default_factory=dict)
    operators: Dict[str, Tuple[Expr, ...]] = field(default_factory=dict)
    gammas: Dict[str, Tuple[Expr, ...]] = field(default_factory=dict)
    adjoints: Dict[str, Expr] = field(default_factory=dict)
    bases: Dict[str, List[Expr]] = field(default_factory=dict)
    listings: Dict[str, List[Expr]] = field(default_factory=dict)
    expects: Dict[str, Expr] = field(default_factory=dict)
    settings: Dict[str, Union[int, str]] = field(default_factory=dict)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ProblemFile":
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), path)

    @classmethod
    def parse(cls, text: str, path: Optional[Path] = None) -> "ProblemFile":
        statements = parse_statements(text)
        header = [st for st in statements if st.kind in HEADER_KINDS]
        table = apply_declarations(header, default_table().derive(), text) if header else default_table()
        problem = cls(text, table, path)
        for st in statements:
            if st.kind not in HEADER_KINDS:
                problem._add(st)
        logger.info("loaded %s: %s", path or "problem", problem.summary())
        return problem

    # ------------------------------------------------------------------

    def _expr(self, chunk: Chunk) -> Expr:
        return parse_chunk(chunk, self.table, self.source)

    def _error(self, st: Statement, message: str) -> DslSyntaxError:
        return DslSyntaxError(message, pp.lineno(st.loc, self.source), pp.col(st.loc, self.source))

    def _unique(self, st: Statement, items: Dict) -> None:
        if st.name in items:
            raise self._error(st, f"duplicate {st.kind} '{st.name}'")

    def _add(self, st: Statement) -> None:
        f = st.fields
        if st.kind == "equation":
            if self.equation is not None:
                raise self._error(st, "only one equation per problem file")
            self.equation = EvolutionEquation.from_rhs(self._expr(f["rhs"]), name=st.name or "eq")
        elif st.kind == "density":
            self._unique(st, self.densities)
            self.densities[st.name] = self._expr(f["rho"])
        elif st.kind == "conserved":
            self._unique(st, self.conserved)
            self.conserved[st.name] = (self._expr(f["rho"]), self._expr(f["sigma"]))
        elif st.kind == "transform":
            self._unique(st, self.transforms)
            inverse = None
            if "inverse" in f:
                inv = f["inverse"]
                inverse = InverseMap(
                    self._expr(inv["T"]),
                    self._expr(inv["X"]),
                    self._expr(inv["U"]),
                    self._expr(inv["V"]) if "V" in inv else None,
                )
            self.transforms[st.name] = TransformSpec(
                st.name,
                self._expr(f["T"]),
                self._expr(f["X"]),
                self._expr(f["U"]),
                self._expr(f["Phi"]) if "Phi" in f else None,
                self._expr(f["V"]) if "V" in f else None,
                inverse,
            )
        elif st.kind == "operator":
            self._unique(st, self.operators)
            self.operators[st.name] = tuple(self._expr(c) for c in f["coefficients"])
        elif st.kind == "gamma":
            self._unique(st, self.gammas)
            self.gammas[st.name] = tuple(self._expr(c) for c in f["coefficients"])
        elif st.kind == "adjoint":
            self._unique(st, self.adjoints)
            self.adjoints[st.name] = self._expr(f["v"])
        elif st.kind == "basis":
            self._unique(st, self.bases)
            self.bases[st.name] = [self._expr(c) for c in f["terms"]]
        elif st.kind == "listing":
            self._unique(st, self.listings)
            self.listings[st.name] = [self._expr(c) for c in f["lines"]]
        elif st.kind == "expect":
            self._unique(st, self.expects)
            self.expects[st.name] = self._expr(f["value"])
        elif st.kind == "set":
            value = f["value"]
            self.settings[st.name] = int(value) if value.lstrip("+-").isdigit() else value
        else:
            raise self._error(st, f"unknown statement '{st.kind}'")

    # ------------------------------------------------------------------

    def require_equation(self) -> EvolutionEquation:
        if self.equation is None:
            raise PreconditionError(f"{self.path or 'problem'}: no equation statement")
        return self.equation

    def conserved_vectors(self, failures: Optional[Dict[str, str]] = None) -> List[ConservedVector]:
        """Conserved blocks as given, then densities with fluxes from flux_from_density.

        When ``failures`` is given, densities that admit no flux are recorded
        there by name instead of raising.
        """
        eq = self.require_equation()
        vectors = [ConservedVector(rho, sigma, eq, name=name) for name, (rho, sigma) in self.conserved.items()]
        for name, rho in self.densities.items():
            try:
                vectors.append(conserved_vector(eq, rho, name=name))
            except (NotADensityError, NoClosedFormError) as exc:
                if failures is None:
                    raise
                logger.info("density %s rejected: %s", name, exc)
                failures[name] = str(exc)
        return vectors

    def linear_operator(self, name: Optional[str] = None) -> LinearOperator:
        if not self.operators:
            raise PreconditionError(f"{self.path or 'problem'}: no operator statement")
        key = name or next(iter(self.operators))
        if key not in self.operators:
            raise PreconditionError(f"unknown operator '{key}'")
        return LinearOperator(self.operators[key])

    def gamma_operators(self) -> Dict[str, GammaOperator]:
        return {name: GammaOperator(coefficients) for name, coefficients in self.gammas.items()}

    def setting(self, name: str, default: Union[int, str, None] = None) -> Union[int, str, None]:
        return self.settings.get(name, default)

    def summary(self) -> str:
        parts = []
        if self.equation is not None:
            parts.append(f"u_t = {to_dsl(self.equation.rhs)}")
        for label, items in (
            ("densities", self.densities),
            ("conserved", self.conserved),
            ("transforms", self.transforms),
            ("operators", self.operators),
            ("gammas", self.gammas),
            ("adjoints", self.adjoints),
            ("bases", self.bases),
            ("listings", self.listings),
        ):
            if items:
                parts.append(f"{len(items)} {label}")
        return ", ".join(parts) or "empty"
