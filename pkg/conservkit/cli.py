"""Command-line front end.

Every subcommand reads one problem file, runs the wrapped operations inside a
proof-log context and prints a text or JSON report.  Exit status: 0 when every
verdict holds, 1 when any verdict fails, 2 on errors.
"""

from __future__ import annotations

import contextvars
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

import click
import yaml
from pydantic import ValidationError

from . import __version__
from .conslaw import (
    ConservedVector,
    characteristic,
    is_characteristic,
    is_trivial_density,
    minimal_density,
    structure_check,
    verify,
)
from .corpus import run_corpus
from .discover import (
    ansatz_from_densities,
    auto_ansatz,
    cosymmetry_basis,
    cosymmetry_scan,
    find_conservation_laws,
)
from .errors import ConservkitError, PreconditionError
from .expr import compare, to_dsl
from .linear import (
    check_gamma,
    determining_system,
    formal_adjoint,
    is_adjoint_solution,
    linear_flux,
    quadratic_cv,
    self_adjoint_part,
    solve_determining,
)
from .problem import ProblemFile
from .reports import ItemReport, RunReport
from .settings import INVERTER_BACKENDS, Settings, get_settings, use_settings
from .storage import proof_log, snapshot_report
from .transform import (
    inverse_transformation,
    pushforward_cv,
    resolve_listing,
    roundtrip_equation,
    singular_loci,
    transform_equation,
    two_cl_point_transform,
    unit_characteristic_transform,
)

logger = logging.getLogger(__name__)

Item = TypeVar("Item")

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


@dataclass
class CliState:
    settings: Settings
    as_json: bool
    log_file: Path
    snapshot: bool = False


def _execute(state: CliState, command: str, body: Callable[[RunReport], None]) -> None:
    ctx = click.get_current_context()
    try:
        with use_settings(state.settings), proof_log() as log:
            report = RunReport(command=command)
            body(report)
            log.note(f"{command} finished", {"ok": report.ok, "items": len(report.items)})
        report.proof_log = str(log.write(state.log_file))
        if state.snapshot:
            path = snapshot_report(state.settings.data_dir / "snapshots", report.to_json_dict(), command)
            logger.info("report snapshot written to %s", path)
    except (ConservkitError, OSError, yaml.YAMLError, ValidationError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERROR)
    if state.as_json:
        click.echo(json.dumps(report.to_json_dict(), indent=2))
    else:
        click.echo(report.render())
    ctx.exit(EXIT_OK if report.ok else EXIT_FAILED)


def _load(path: Path) -> ProblemFile:
    return ProblemFile.load(path)


def _conserved(problem: ProblemFile, report: RunReport, kind: str) -> List[ConservedVector]:
    """Conserved vectors of the file; densities without a flux become failed items."""
    failures: Dict[str, str] = {}
    vectors = problem.conserved_vectors(failures)
    for name, message in failures.items():
        report.add(ItemReport(name=name, kind=kind, verified=False, notes=[message]))
    return vectors


def _each(items: Sequence[Item], check: Callable[[Item], ItemReport], report: RunReport) -> None:
    """Run check on every item, on up to ``workers`` threads; reports keep input order."""
    workers = get_settings().workers
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(contextvars.copy_context().run, check, item) for item in items]
            results = [f.result() for f in futures]
    else:
        results = [check(item) for item in items]
    for result in results:
        report.add(result)


pass_state = click.make_pass_decorator(CliState)
problem_argument = click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))


@click.group(invoke_without_command=True)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
@click.option("--nmax", type=int, default=None, help="Jet index cap (overrides CONSERVKIT_NMAX).")
@click.option("--inverter", type=click.Choice(INVERTER_BACKENDS), default=None, help="Inverse-map backend.")
@click.option("--workers", type=int, default=None, help="Threads for independent items (overrides CONSERVKIT_WORKERS).")
@click.option("--verbose", is_flag=True, help="Log at INFO level.")
@click.option("--log-file", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Proof log path.")
@click.option("--snapshot", is_flag=True, help="Also save the JSON report under DATA_DIR/snapshots.")
@click.option("--check-paper", is_flag=True, help="Run the bundled golden corpus.")
@click.version_option(__version__, prog_name="conservkit")
@click.pass_context
def main(
    ctx: click.Context,
    as_json: bool,
    nmax: Optional[int],
    inverter: Optional[str],
    workers: Optional[int],
    verbose: bool,
    log_file: Optional[Path],
    snapshot: bool,
    check_paper: bool,
) -> None:
    """Verify, reduce, transform and discover conservation laws of evolution equations."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    try:
        settings = get_settings().with_overrides(n_max=nmax, inverter=inverter, workers=workers)
    except ValidationError as exc:
        raise click.BadParameter(str(exc)) from None
    ctx.obj = CliState(settings, as_json, log_file or settings.data_dir / "proof.log", snapshot)
    if check_paper:
        ctx.invoke(check_paper_command)
    elif ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# ---------------------------------------------------------------------------
# Conservation laws


@main.command("parse")
@problem_argument
@pass_state
def parse_command(state: CliState, file: Path) -> None:
    """Parse a problem file and print its normalized items."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        if problem.equation is not None:
            eq = problem.equation
            structure = structure_check(eq)
            data = {"rhs": to_dsl(eq.rhs), "order": eq.order}
            data.update({k: v for k, v in structure.to_dict().items() if v is not None})
            report.add(ItemReport(name=eq.name, kind="equation", data=data))
        for name, rho in problem.densities.items():
            report.add(ItemReport(name=name, kind="density", data={"rho": to_dsl(rho)}))
        for name, (rho, sigma) in problem.conserved.items():
            report.add(ItemReport(name=name, kind="conserved", data={"rho": to_dsl(rho), "sigma": to_dsl(sigma)}))
        for name, spec in problem.transforms.items():
            data = {"T": to_dsl(spec.T), "X": to_dsl(spec.X), "U": to_dsl(spec.U)}
            report.add(ItemReport(name=name, kind="transform", data=data))
        for name, coefficients in problem.operators.items():
            report.add(ItemReport(name=name, kind="operator", data={"A": [to_dsl(c) for c in coefficients]}))
        for name, terms in problem.bases.items():
            report.add(ItemReport(name=name, kind="basis", data={"terms": [to_dsl(b) for b in terms]}))

    _execute(state, "parse", body)


@main.command("verify")
@problem_argument
@pass_state
def verify_command(state: CliState, file: Path) -> None:
    """Check D_t(rho) + D_x(sigma) = 0 for every conserved vector and density."""

    def check(cv: ConservedVector) -> ItemReport:
        ok = verify(cv)
        item = ItemReport(name=cv.name, kind="conserved vector", verified=ok)
        item.data = {"rho": to_dsl(cv.rho), "sigma": to_dsl(cv.sigma)}
        if ok:
            item.characteristic = to_dsl(characteristic(cv))
        return item

    def body(report: RunReport) -> None:
        _each(_conserved(_load(file), report, "conserved vector"), check, report)

    _execute(state, "verify", body)


@main.command("characteristic")
@problem_argument
@pass_state
def characteristic_command(state: CliState, file: Path) -> None:
    """Print characteristics and check the characteristic criterion."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        eq = problem.require_equation()
        def check(cv: ConservedVector) -> ItemReport:
            if not verify(cv):
                return ItemReport(name=cv.name, kind="characteristic", verified=False, notes=["not conserved"])
            gamma = characteristic(cv)
            ok = is_characteristic(eq, gamma)
            item = ItemReport(name=cv.name, kind="characteristic", verified=ok, characteristic=to_dsl(gamma))
            expected = problem.expects.get(f"char_{cv.name}")
            if expected is not None and not compare(gamma, expected, label=f"characteristic of {cv.name}").equal:
                item.verified = False
                item.notes.append(f"expected {to_dsl(expected)}")
            return item

        _each(_conserved(problem, report, "characteristic"), check, report)

    _execute(state, "characteristic", body)


@main.command("reduce")
@problem_argument
@pass_state
def reduce_command(state: CliState, file: Path) -> None:
    """Reduce every conservation law to a density of minimal order."""

    def check(cv: ConservedVector) -> ItemReport:
        if not verify(cv):
            return ItemReport(name=cv.name, kind="conservation law", verified=False, notes=["not conserved"])
        return ItemReport.from_record(cv.name, minimal_density(cv))

    def body(report: RunReport) -> None:
        _each(_conserved(_load(file), report, "conservation law"), check, report)

    _execute(state, "reduce", body)


@main.command("trivial")
@problem_argument
@pass_state
def trivial_command(state: CliState, file: Path) -> None:
    """Report which densities are total x-derivatives."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        densities = dict(problem.densities)
        densities.update({name: rho for name, (rho, _) in problem.conserved.items()})
        for name, rho in densities.items():
            report.add(ItemReport(name=name, kind="density", trivial=is_trivial_density(rho), data={"rho": to_dsl(rho)}))

    _execute(state, "trivial", body)


# ---------------------------------------------------------------------------
# Transformations


@main.command("transform")
@problem_argument
@click.option("--name", "names", multiple=True, help="Only these transforms.")
@click.option("--roundtrip", is_flag=True, help="Also transform back and compare.")
@click.option("--two-laws", nargs=2, default=None, help="Build the point map from two zero-order densities.")
@click.option("--unit-char", default=None, help="Build the unit-characteristic map for a density.")
@click.option("--density", "density_names", multiple=True, help="Densities to resolve listings against (default: all).")
@pass_state
def transform_command(
    state: CliState,
    file: Path,
    names: Sequence[str],
    roundtrip: bool,
    two_laws: Optional[Sequence[str]],
    unit_char: Optional[str],
    density_names: Sequence[str],
) -> None:
    """Transform the equation by each transform block (or a constructed map)."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        eq = problem.require_equation()
        built = []
        for name, spec in problem.transforms.items():
            if not names or name in names:
                built.append(spec.build())
        if two_laws:
            first, second = (_density(problem, n) for n in two_laws)
            built.append(two_cl_point_transform(first, second, name="two laws").as_contact())
        if unit_char:
            built.append(unit_characteristic_transform(eq, _density(problem, unit_char), name=f"unit {unit_char}"))
        for ct in built:
            inverse = inverse_transformation(ct)
            transformed = transform_equation(eq, ct, inverse)
            item = ItemReport(name=ct.name, kind="transform")
            item.data = {
                "map": ct.describe(),
                "rhs": to_dsl(transformed.rhs),
                "singular": [to_dsl(l) for l in singular_loci(ct)],
            }
            expected = problem.expects.get(f"rhs_{ct.name}", problem.expects.get("rhs"))
            if expected is not None:
                item.verified = compare(transformed.rhs, expected, label=f"{ct.name}: transformed equation").equal
            if roundtrip:
                back = roundtrip_equation(eq, ct)
                item.data["roundtrip"] = back.method
                item.verified = back.equal and item.verified is not False
            report.add(item)
        if problem.listings:
            densities = list(density_names) or list(problem.densities)
            if not densities:
                raise PreconditionError("a listing needs at least one density")
            for name, lines in problem.listings.items():
                for dname in densities:
                    candidates = resolve_listing(_density(problem, dname), lines)
                    valid = [c for c in candidates if c.valid]
                    label = name if len(densities) == 1 else f"{name} for {dname}"
                    item = ItemReport(name=label, kind="listing", verified=bool(valid))
                    item.data = {"density": dname, "candidates": [c.to_dict() for c in candidates]}
                    report.add(item)

    _execute(state, "transform", body)


def _density(problem: ProblemFile, name: str):
    if name not in problem.densities:
        raise PreconditionError(f"unknown density '{name}'")
    return problem.densities[name]


@main.command("pushforward")
@problem_argument
@pass_state
def pushforward_command(state: CliState, file: Path) -> None:
    """Push every conserved vector through every transform and verify."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        eq = problem.require_equation()
        vectors = _conserved(problem, report, "pushforward")
        for spec in problem.transforms.values():
            ct = spec.build()
            inverse = inverse_transformation(ct)
            target = transform_equation(eq, ct, inverse)
            for cv in vectors:
                pushed = pushforward_cv(cv, ct, target, inverse)
                ok = verify(pushed)
                item = ItemReport(name=f"{cv.name} under {ct.name}", kind="pushforward", verified=ok)
                item.data = {"rho": to_dsl(pushed.rho), "sigma": to_dsl(pushed.sigma), "equation": to_dsl(target.rhs)}
                if ok:
                    item.characteristic = to_dsl(characteristic(pushed))
                report.add(item)

    _execute(state, "pushforward", body)


# ---------------------------------------------------------------------------
# Linear equations


@main.group("linear")
def linear_group() -> None:
    """Linear equations u_t = sum A^i u_i."""


@linear_group.command("adjoint")
@problem_argument
@pass_state
def adjoint_command(state: CliState, file: Path) -> None:
    """Print the formal adjoint and check adjoint solutions."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        op = problem.linear_operator()
        report.add(ItemReport(name="adjoint", kind="operator", data={"operator": str(op), "adjoint": str(formal_adjoint(op))}))
        for name, v in problem.adjoints.items():
            report.add(ItemReport(name=name, kind="adjoint solution", verified=is_adjoint_solution(op, v)))

    _execute(state, "linear adjoint", body)


@linear_group.command("flux")
@problem_argument
@pass_state
def flux_command(state: CliState, file: Path) -> None:
    """Linear conservation laws (v u, sigma) for each adjoint solution v."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        op = problem.linear_operator()
        for name, v in problem.adjoints.items():
            cv = linear_flux(op, v)
            item = ItemReport(name=name, kind="linear law", verified=verify(cv))
            item.data = {"rho": to_dsl(cv.rho), "sigma": to_dsl(cv.sigma)}
            report.add(item)

    _execute(state, "linear flux", body)


@linear_group.command("determine")
@problem_argument
@click.option("--r", "r", type=int, default=None, help="Order of Gamma in the ansatz.")
@click.option("--degree", type=int, default=None, help="Solve with polynomial coefficients up to this degree.")
@pass_state
def determine_command(state: CliState, file: Path, r: Optional[int], degree: Optional[int]) -> None:
    """Determining system for cosymmetries sum g^k u_k + v; optionally solve it."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        op = problem.linear_operator()
        rr = r if r is not None else int(problem.setting("r", 1))
        system = determining_system(op, rr)
        report.add(ItemReport(name=f"r = {rr}", kind="determining system", data=system.to_dict()))
        deg = degree if degree is not None else problem.setting("degree")
        if deg is None:
            return
        solutions = solve_determining(op, rr, int(deg))
        item = ItemReport(name=f"degree {deg}", kind="determining solutions")
        item.data = {"solutions": [s.to_dict() for s in solutions]}
        item.notes.append(
            "jet-dependent cosymmetries found"
            if any(s.jet_dependent for s in solutions)
            else "all cosymmetries depend on t and x only"
        )
        report.add(item)

    _execute(state, "linear determine", body)


@linear_group.command("gamma")
@problem_argument
@pass_state
def gamma_command(state: CliState, file: Path) -> None:
    """Check Gamma-operator conditions and build quadratic conservation laws."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        op = problem.linear_operator()
        for name, G in problem.gamma_operators().items():
            ok = check_gamma(op, G)
            item = ItemReport(name=name, kind="Gamma operator", verified=ok, data={"Gamma": str(G)})
            if ok:
                sym = G if G.op.is_self_adjoint() else self_adjoint_part(G)
                if sym.is_zero:
                    item.notes.append("self-adjoint part vanishes; no quadratic law")
                else:
                    record = minimal_density(quadratic_cv(op, sym, name=name))
                    item.density_order = record.density_order
                    item.characteristic = to_dsl(record.characteristic)
                    item.data["density"] = to_dsl(record.representative.rho)
            report.add(item)

    _execute(state, "linear gamma", body)


# ---------------------------------------------------------------------------
# Discovery


@main.command("discover")
@problem_argument
@click.option("--max-order", type=int, default=None)
@click.option("--jet-degree", type=int, default=None)
@click.option("--tx-degree", type=int, default=None)
@click.option("--basis-file", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--cosymmetries", is_flag=True, help="Scan for cosymmetries instead of densities.")
@pass_state
def discover_command(
    state: CliState,
    file: Path,
    max_order: Optional[int],
    jet_degree: Optional[int],
    tx_degree: Optional[int],
    basis_file: Optional[Path],
    cosymmetries: bool,
) -> None:
    """Search an ansatz for conservation laws (or cosymmetries)."""

    def body(report: RunReport) -> None:
        problem = _load(file)
        eq = problem.require_equation()
        order = max_order if max_order is not None else int(problem.setting("max_order", 1))
        degree = jet_degree if jet_degree is not None else int(problem.setting("jet_degree", 2))
        txd = tx_degree if tx_degree is not None else int(problem.setting("tx_degree", 1))
        if cosymmetries:
            for i, record in enumerate(cosymmetry_scan(eq, cosymmetry_basis(order, degree, txd)), 1):
                report.add(ItemReport(name=f"cosymmetry {i}", kind="cosymmetry", data=record.to_dict()))
            return
        bases = _load(basis_file).bases if basis_file else problem.bases
        if bases:
            spec = ansatz_from_densities([b for terms in bases.values() for b in terms])
        else:
            spec = auto_ansatz(eq, order, degree, txd)
        result = find_conservation_laws(eq, spec)
        for i, record in enumerate(result.records, 1):
            report.add(ItemReport.from_record(f"law {i}", record))
        summary = ItemReport(name="ansatz", kind="discovery", data={"basis": len(spec.basis), "dimension": result.dimension})
        summary.notes.extend(result.notes)
        summary.notes.extend(f"rejected {to_dsl(term)}: {reason}" for term, reason in result.rejected)
        report.add(summary)

    _execute(state, "discover", body)


@main.command("check-paper")
@click.option("--case", "cases", multiple=True, help="Run only the named cases.")
@pass_state
def check_paper_command(state: CliState, cases: Sequence[str] = ()) -> None:
    """Run the golden corpus of worked examples."""

    def body(report: RunReport) -> None:
        result = run_corpus(names=cases or None)
        for item in result.items:
            report.add(item)

    _execute(state, "check-paper", body)


if __name__ == "__main__":
    main()
