from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from conservkit import __version__
from conservkit.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, main
from conservkit.settings import use_settings

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def invoke(*args: str):
        return runner.invoke(main, ["--log-file", str(tmp_path / "proof.log"), *args])

    return invoke


def _json(result):
    return json.loads(result.output)


def test_version():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_no_command_prints_help():
    result = CliRunner().invoke(main, [])
    assert result.exit_code == 0
    assert "discover" in result.output


def test_verify_kdv_json(run, tmp_path):
    result = run("--json", "verify", str(PROBLEMS / "kdv.ck"))
    assert result.exit_code == EXIT_OK, result.output
    report = _json(result)
    assert report["schema"] == 1
    assert report["command"] == "verify"
    assert report["ok"] is True
    assert len(report["items"]) == 5
    assert all(item["verified"] for item in report["items"])
    assert report["proof_log"] == str(tmp_path / "proof.log")
    entries = [json.loads(line) for line in (tmp_path / "proof.log").read_text().splitlines()]
    assert entries and all({"ts", "summary", "meta"} <= set(entry) for entry in entries)


def test_verify_failure_exit_code(run, tmp_path):
    path = tmp_path / "bad.ck"
    path.write_text("equation = u3 + u*u1;\nconserved bad { rho = u; sigma = u2; }\n")
    result = run("verify", str(path))
    assert result.exit_code == EXIT_FAILED
    assert "FAILED" in result.output


def test_syntax_error_exit_code(run, tmp_path):
    path = tmp_path / "broken.ck"
    path.write_text("equation = u3 +;\n")
    result = run("verify", str(path))
    assert result.exit_code == EXIT_ERROR
    assert "error:" in result.output


def test_missing_equation_is_an_error(run):
    result = run("verify", str(PROBLEMS / "linear_e3.ck"))
    assert result.exit_code == EXIT_ERROR


def test_invalid_nmax(run):
    result = run("--nmax", "2", "verify", str(PROBLEMS / "kdv.ck"))
    assert result.exit_code == 2


def test_parse_reports_structure(run):
    result = run("--json", "parse", str(PROBLEMS / "kdv.ck"))
    assert result.exit_code == EXIT_OK
    equation = _json(result)["items"][0]
    assert equation["kind"] == "equation"
    assert equation["data"]["conservative"] is True


def test_characteristic_and_reduce(run):
    assert run("characteristic", str(PROBLEMS / "kdv.ck")).exit_code == EXIT_OK
    result = run("--json", "reduce", str(PROBLEMS / "kdv_trivial.ck"))
    assert result.exit_code == EXIT_OK
    items = {item["name"]: item for item in _json(result)["items"]}
    assert items["exact"]["trivial"] is True
    assert items["second"]["density_order"] == 1


def test_trivial(run):
    result = run("--json", "trivial", str(PROBLEMS / "kdv_trivial.ck"))
    items = {item["name"]: item for item in _json(result)["items"]}
    assert items["exact"]["trivial"] is True
    assert items["gauge"]["trivial"] is False


def test_transform_with_roundtrip(run):
    result = run("--json", "transform", str(PROBLEMS / "kdv_transforms.ck"), "--name", "galilean", "--roundtrip")
    assert result.exit_code == EXIT_OK, result.output
    item = _json(result)["items"][0]
    assert item["verified"] is True
    assert item["data"]["singular"]


def test_transform_constructed_maps(run):
    path = str(PROBLEMS / "kdv.ck")
    assert run("transform", path, "--two-laws", "rhoI", "rhoII").exit_code == EXIT_OK
    assert run("transform", path, "--unit-char", "rhoII").exit_code == EXIT_OK
    assert run("transform", path, "--unit-char", "missing").exit_code == EXIT_ERROR


def test_transform_listing(run):
    result = run("--json", "transform", str(PROBLEMS / "schwarzian.ck"))
    assert result.exit_code == EXIT_OK, result.output
    kinds = {item["kind"]: item for item in _json(result)["items"]}
    assert kinds["listing"]["verified"] is True


def test_pushforward(run):
    result = run("pushforward", str(PROBLEMS / "kdv_transforms.ck"))
    assert result.exit_code == EXIT_OK, result.output


def test_linear_commands(run):
    path = str(PROBLEMS / "linear_e3.ck")
    assert run("linear", "adjoint", path).exit_code == EXIT_OK
    assert run("linear", "flux", path).exit_code == EXIT_OK
    result = run("--json", "linear", "gamma", path)
    assert result.exit_code == EXIT_OK, result.output
    items = {item["name"]: item for item in _json(result)["items"]}
    assert items["identity"]["density_order"] == 0
    assert items["upsilon"]["density_order"] == 1


def test_linear_determine(run):
    result = run("--json", "linear", "determine", str(PROBLEMS / "linear_e3.ck"), "--r", "1", "--degree", "1")
    assert result.exit_code == EXIT_OK, result.output
    items = _json(result)["items"]
    assert items[0]["kind"] == "determining system"
    assert items[1]["notes"] == ["jet-dependent cosymmetries found"]


def test_discover(run):
    result = run("--json", "discover", str(PROBLEMS / "kdv_discover.ck"))
    assert result.exit_code == EXIT_OK, result.output
    summary = _json(result)["items"][-1]
    assert summary["data"]["dimension"] == 4


def test_discover_uses_problem_basis(run):
    result = run("--json", "discover", str(PROBLEMS / "harry_dym.ck"))
    summary = _json(result)["items"][-1]
    assert summary["data"]["dimension"] == 5


def test_discover_with_basis_file(run, tmp_path):
    basis = tmp_path / "basis.ck"
    basis.write_text("basis kdv { u; u^2; x*u + t*u^2/2; u1^2; }\n")
    result = run("--json", "discover", str(PROBLEMS / "kdv.ck"), "--basis-file", str(basis))
    assert result.exit_code == EXIT_OK, result.output
    summary = _json(result)["items"][-1]
    assert summary["data"] == {"basis": 4, "dimension": 3}


def test_discover_cosymmetries(run):
    result = run(
        "--json", "discover", str(PROBLEMS / "kdv.ck"),
        "--cosymmetries", "--max-order", "2", "--jet-degree", "2", "--tx-degree", "1",
    )
    assert result.exit_code == EXIT_OK, result.output
    assert len(_json(result)["items"]) == 4


def test_check_paper_selected_cases(run):
    result = run("--json", "check-paper", "--case", "kdv densities", "--case", "kdv wrong flux")
    assert result.exit_code == EXIT_OK, result.output
    report = _json(result)
    assert [item["name"] for item in report["items"]] == ["kdv densities", "kdv wrong flux"]


def test_snapshot_is_written_under_data_dir(run, tmp_path):
    with use_settings(data_dir=tmp_path / "data"):
        result = run("--snapshot", "verify", str(PROBLEMS / "kdv.ck"))
    assert result.exit_code == EXIT_OK, result.output
    snapshots = list((tmp_path / "data" / "snapshots").glob("verify-*.json"))
    assert len(snapshots) == 1
    assert json.loads(snapshots[0].read_text())["schema"] == 1


def test_non_density_is_a_failed_item(run, tmp_path):
    path = tmp_path / "mixed.ck"
    path.write_text("equation kdv = u3 + u*u1;\ndensity good = u;\ndensity bad = u1^2;\n")
    result = run("--json", "verify", str(path))
    assert result.exit_code == EXIT_FAILED, result.output
    items = {item["name"]: item for item in _json(result)["items"]}
    assert items["good"]["verified"] is True
    assert items["bad"]["verified"] is False
    assert "not a conservation-law density" in items["bad"]["notes"][0]
    for command in ("characteristic", "reduce"):
        result = run("--json", command, str(path))
        assert result.exit_code == EXIT_FAILED
        assert {item["name"] for item in _json(result)["items"]} == {"good", "bad"}


def test_listing_against_chosen_density(run, tmp_path):
    text = (PROBLEMS / "schwarzian.ck").read_text() + "density other = u;\n"
    path = tmp_path / "schwarzian_two.ck"
    path.write_text(text)
    result = run("--json", "transform", str(path), "--name", "none", "--density", "rho")
    listings = [item for item in _json(result)["items"] if item["kind"] == "listing"]
    assert [item["name"] for item in listings] == ["printed"]
    assert listings[0]["verified"] is True
    result = run("--json", "transform", str(path), "--name", "none")
    listings = {item["name"]: item for item in _json(result)["items"] if item["kind"] == "listing"}
    assert set(listings) == {"printed for rho", "printed for other"}
    assert listings["printed for rho"]["verified"] is True
    assert run("transform", str(path), "--density", "missing").exit_code == EXIT_ERROR


def test_run_summary_closes_the_proof_log(run, tmp_path):
    run("verify", str(PROBLEMS / "kdv.ck"))
    last = json.loads((tmp_path / "proof.log").read_text().splitlines()[-1])
    assert last["summary"] == "verify finished"
    assert last["meta"]["ok"] is True
    assert last["meta"]["items"] >= 5


def test_workers_keep_report_order(run):
    serial = _json(run("--json", "reduce", str(PROBLEMS / "kdv.ck")))
    threaded = run("--json", "--workers", "4", "reduce", str(PROBLEMS / "kdv.ck"))
    assert threaded.exit_code == EXIT_OK
    assert _json(threaded)["items"] == serial["items"]


def test_workers_must_be_positive(run):
    assert run("--workers", "0", "verify", str(PROBLEMS / "kdv.ck")).exit_code != EXIT_OK
