"""Golden corpus: the worked examples as executable checks."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, Field

from ..conslaw import characteristic, minimal_density, structure_check, verify
from ..discover import ansatz_from_densities, auto_ansatz, find_conservation_laws
from ..errors import ConservkitError
from ..expr import compare, to_dsl
from ..linear import check_gamma, is_adjoint_solution, linear_flux, quadratic_cv, solve_determining, upsilon_gamma
from ..problem import ProblemFile
from ..reports import ItemReport, RunReport
from ..storage import current_log, proof_log
from ..transform import (
    check_unit_char_systems,
    inverse_transformation,
    pushforward_cv,
    resolve_listing,
    transform_equation,
    two_cl_point_transform,
    unit_characteristic_transform,
)

logger = logging.getLogger(__name__)

CORPUS_PATH = Path(__file__).with_name("paper.yaml")

CaseKind = Literal[
    "verify",
    "structure",
    "transform",
    "listing",
    "unit_characteristic",
    "two_laws",
    "discover",
    "linear_flux",
    "quadratic",
    "determining",
]


class CorpusCase(BaseModel):
    name: str
    kind: CaseKind
    problem: str
    header: str = ""
    orders: Dict[str, Union[int, Literal["trivial"]]] = Field(default_factory=dict)
    fail: List[str] = Field(default_factory=list)
    transform: Optional[str] = None
    pushforward: bool = False
    rejected: List[str] = Field(default_factory=list)
    density: Optional[str] = None
    densities: List[str] = Field(default_factory=list)
    listing: Optional[str] = None
    valid: Optional[int] = None
    auto: Optional[List[int]] = None
    basis: Optional[str] = None
    dimension: Optional[int] = None
    quasi_linear: Optional[bool] = None
    conservative: Optional[bool] = None
    doubly_conservative: Optional[bool] = None
    max_l: int = 0
    max_m: int = 0
    r: int = 0
    degree: int = 0
    jet_dependent: Optional[bool] = None

    def load(self) -> ProblemFile:
        return ProblemFile.parse(self.header + self.problem)


def load_cases(path: Optional[Path] = None) -> List[CorpusCase]:
    data = yaml.safe_load((path or CORPUS_PATH).read_text(encoding="utf-8"))
    return [CorpusCase(**case) for case in data["cases"]]


class _Check:
    """Collects failed expectations for one case."""

    def __init__(self, item: ItemReport) -> None:
        self.item = item
        self.failures: List[str] = []

    def expect(self, condition: bool, message: str) -> None:
        if not condition:
            self.failures.append(message)

    def equal(self, actual, expected, what: str) -> None:
        verdict = compare(actual, expected, label=f"{self.item.name}: {what}")
        self.expect(verdict.equal, f"{what}: got {to_dsl(actual)}, expected {to_dsl(expected)}")


def _characteristics(check: _Check, problem: ProblemFile, vectors) -> None:
    for cv in vectors:
        expected = problem.expects.get(f"char_{cv.name.rstrip('~')}")
        if expected is not None:
            check.equal(characteristic(cv), expected, f"characteristic of {cv.name}")


def _run_verify(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    vectors = problem.conserved_vectors()
    for cv in vectors:
        ok = verify(cv)
        if cv.name in case.fail:
            check.expect(not ok, f"{cv.name} verified but should fail")
            continue
        check.expect(ok, f"{cv.name} does not verify")
        if not ok:
            continue
        record = minimal_density(cv)
        expected = case.orders.get(cv.name)
        if expected == "trivial":
            check.expect(record.trivial, f"{cv.name} should be trivial")
        elif expected is not None:
            check.expect(record.density_order == expected, f"{cv.name}: density order {record.density_order} != {expected}")
        check.item.data[cv.name] = "trivial" if record.trivial else f"order {record.density_order}"
    _characteristics(check, problem, [cv for cv in vectors if cv.name not in case.fail])


def _run_structure(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    report = structure_check(problem.require_equation())
    for field_name in ("quasi_linear", "conservative", "doubly_conservative"):
        expected = getattr(case, field_name)
        if expected is not None:
            check.expect(getattr(report, field_name) == expected, f"{field_name} should be {expected}")
    if "G" in problem.expects and report.G is not None:
        check.equal(report.G, problem.expects["G"], "conservative form G")
    check.item.data.update({k: v for k, v in report.to_dict().items() if v is not None and k != "notes"})


def _run_transform(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    eq = problem.require_equation()
    ct = problem.transforms[case.transform].build()
    inverse = inverse_transformation(ct)
    transformed = transform_equation(eq, ct, inverse)
    check.item.data["rhs"] = to_dsl(transformed.rhs)
    for name, expected in problem.expects.items():
        if name.startswith("rhs"):
            check.equal(transformed.rhs, expected, f"transformed right-hand side ({name})")
    for name in case.rejected:
        verdict = compare(transformed.rhs, problem.expects[name], label=f"{case.name}: printed form {name}")
        check.expect(not verdict.equal, f"printed form {name} unexpectedly holds")
        check.item.notes.append(f"printed form '{name}' rejected")
    if case.density:
        rho = problem.densities[case.density]
        check.expect(
            ct.phi is not None and check_unit_char_systems(rho, ct.X, ct.U, ct.phi),
            f"unit-characteristic system fails for {case.density}",
        )
    if case.pushforward:
        pushed = [pushforward_cv(cv, ct, transformed, inverse) for cv in problem.conserved_vectors()]
        for cv in pushed:
            check.expect(verify(cv), f"pushforward of {cv.name} does not verify")
        _characteristics(check, problem, pushed)


def _run_listing(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    candidates = resolve_listing(problem.densities[case.density], problem.listings[case.listing])
    valid = [c for c in candidates if c.valid]
    check.expect(len(valid) == case.valid, f"{len(valid)} valid readings, expected {case.valid}")
    if len(valid) == 1:
        check.equal(valid[0].X, problem.expects["X"], "X of the valid reading")
        check.equal(valid[0].U, problem.expects["U"], "U of the valid reading")
        check.item.data["reading"] = valid[0].to_dict()


def _run_unit_characteristic(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    eq = problem.require_equation()
    rho = problem.densities[case.density]
    ct = unit_characteristic_transform(eq, rho, name=case.density)
    check.equal(ct.U, problem.expects["U"], "U")
    check.expect(check_unit_char_systems(rho, ct.X, ct.U, ct.phi), "unit-characteristic system fails")
    check.item.data["map"] = ct.describe()


def _run_two_laws(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    eq = problem.require_equation()
    first, second = (problem.densities[name] for name in case.densities)
    point = two_cl_point_transform(first, second, name=case.name)
    check.equal(point.X, problem.expects["X"], "X")
    check.equal(point.U, problem.expects["U"], "U")
    ct = point.as_contact()
    check.item.data["map"] = ct.describe()
    if any(name.startswith("char_") for name in problem.expects):
        inverse = inverse_transformation(ct)
        target = transform_equation(eq, ct, inverse)
        vectors = [cv for cv in problem.conserved_vectors() if cv.name in case.densities]
        pushed = [pushforward_cv(cv, ct, target, inverse) for cv in vectors]
        for cv in pushed:
            check.expect(verify(cv), f"pushforward of {cv.name} does not verify")
        _characteristics(check, problem, pushed)


def _run_discover(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    eq = problem.require_equation()
    if case.basis:
        spec = ansatz_from_densities(problem.bases[case.basis])
    else:
        spec = auto_ansatz(eq, *case.auto)
    result = find_conservation_laws(eq, spec)
    check.expect(result.dimension == case.dimension, f"dimension {result.dimension}, expected {case.dimension}")
    check.item.data["densities"] = [to_dsl(r.representative.rho) for r in result.records]
    check.item.notes.extend(result.notes)


def _run_linear_flux(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    op = problem.linear_operator()
    for name, v in problem.adjoints.items():
        check.expect(is_adjoint_solution(op, v), f"{name} does not solve the adjoint equation")
        cv = linear_flux(op, v)
        check.expect(verify(cv), f"linear law for {name} does not verify")
        check.item.data[name] = to_dsl(cv.sigma)


def _run_quadratic(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    op = problem.linear_operator()
    for l in range(case.max_l + 1):
        for m in range(case.max_m + 1):
            G = upsilon_gamma(l, m)
            check.expect(check_gamma(op, G), f"Gamma(l={l}, m={m}) fails the Gamma-operator condition")
            record = minimal_density(quadratic_cv(op, G))
            check.expect(record.density_order == l + m, f"(l={l}, m={m}): density order {record.density_order}")


def _run_determining(case: CorpusCase, problem: ProblemFile, check: _Check) -> None:
    op = problem.linear_operator()
    solutions = solve_determining(op, case.r, case.degree)
    found = any(s.jet_dependent for s in solutions)
    if case.jet_dependent is not None:
        check.expect(found == case.jet_dependent, f"jet-dependent cosymmetries found: {found}")
    check.item.data["solutions"] = len(solutions)


_RUNNERS: Dict[str, Callable[[CorpusCase, ProblemFile, _Check], None]] = {
    "verify": _run_verify,
    "structure": _run_structure,
    "transform": _run_transform,
    "listing": _run_listing,
    "unit_characteristic": _run_unit_characteristic,
    "two_laws": _run_two_laws,
    "discover": _run_discover,
    "linear_flux": _run_linear_flux,
    "quadratic": _run_quadratic,
    "determining": _run_determining,
}


def run_case(case: CorpusCase) -> ItemReport:
    item = ItemReport(name=case.name, kind=case.kind)
    check = _Check(item)
    with proof_log() as case_log:
        try:
            _RUNNERS[case.kind](case, case.load(), check)
        except ConservkitError as exc:
            check.failures.append(f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # noqa: BLE001
            logger.exception("corpus case %s crashed", case.name)
            check.failures.append(f"{type(exc).__name__}: {exc}")
    outer = current_log()
    if outer is not None:
        outer.extend(case_log)
    item.verified = not check.failures
    item.notes.extend(check.failures)
    item.data["identities"] = len(case_log)
    logger.info("corpus case %s: %s (%d identities)", case.name, "ok" if item.verified else "FAILED", len(case_log))
    return item


def run_corpus(path: Optional[Path] = None, names: Optional[Sequence[str]] = None) -> RunReport:
    report = RunReport(command="check-paper")
    for case in load_cases(path):
        if names and case.name not in names:
            continue
        report.add(run_case(case))
    return report
