import json
import os
import subprocess
import sys

import pytest

from flatcert.catalog import ENTRIES, write_entry
from flatcert.cli import main

from conftest import FIXTURES, GOLDEN

EXPECTED_EXIT = {
    "double_integrator": 0,
    "pendulum": 0,
    "planar_mass_point": 0,
    "unicycle": 1,
    "broken_phi_fixture": 1,
}


@pytest.fixture(scope="module")
def specs(tmp_path_factory):
    d = tmp_path_factory.mktemp("specs")
    return {name: write_entry(name, d) for name in ENTRIES}


def skeleton(report: dict) -> dict:
    """Shape of a report with the numbers stripped out."""
    return {
        "schema": report["schema"],
        "verdict": report["verdict"],
        "meta_keys": sorted(report["meta"]),
        "blocks": [
            {
                "name": b["name"],
                "mandatory": b["mandatory"],
                "status": b["status"],
                "evidence_keys": sorted(b["evidence"]),
            }
            for b in report["blocks"]
        ],
    }


def test_catalog_listing(capsys):
    assert main(["catalog"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split()[0] for line in lines] == list(ENTRIES)


def test_catalog_emits_loadable_file(tmp_path):
    assert main(["catalog", "pendulum", "--dir", str(tmp_path)]) == 0
    assert main(["check", str(tmp_path / "pendulum.flat"), "--samples", "10"]) == 0


def test_catalog_unknown_entry(capsys):
    assert main(["catalog", "nonexistent"]) == 2
    assert "nonexistent" in capsys.readouterr().err


@pytest.mark.parametrize("name", list(ENTRIES))
def test_check_exit_codes_and_golden_schema(name, specs, tmp_path):
    out = tmp_path / "report.json"
    assert main(["check", str(specs[name]), "--json", str(out)]) == EXPECTED_EXIT[name]
    shape = skeleton(json.loads(out.read_text()))
    golden = GOLDEN / f"{name}.json"
    if os.environ.get("FLATCERT_REGEN_GOLDEN"):
        golden.write_text(json.dumps(shape, indent=2) + "\n")
    assert shape == json.loads(golden.read_text())


def test_check_failing_blocks(specs, tmp_path):
    out = tmp_path / "u.json"
    main(["check", str(specs["unicycle"]), "--json", str(out)])
    blocks = {b["name"]: b for b in json.loads(out.read_text())["blocks"]}
    assert blocks["pde"]["status"] == blocks["submersion"]["status"] == "pass"
    assert blocks["equilibrium-map"]["status"] == "fail"
    assert "atan2" in blocks["equilibrium-map"]["verdict"]
    main(["check", str(specs["broken_phi_fixture"]), "--json", str(out)])
    blocks = {b["name"]: b for b in json.loads(out.read_text())["blocks"]}
    assert blocks["pde"]["status"] == "fail"
    assert blocks["pde"]["evidence"]["max_residual"] > 1.0


def test_check_block_order(specs, tmp_path):
    out = tmp_path / "r.json"
    main(["check", str(specs["double_integrator"]), "--json", str(out)])
    names = [b["name"] for b in json.loads(out.read_text())["blocks"]]
    assert names[:10] == [
        "consistency",
        "pde",
        "submersion",
        "dphi-rank",
        "equilibrium-map",
        "equilibrium-identities",
        "chain-inclusions",
        "kalman",
        "structure-identities",
        "surjectivity-probe",
    ]


def test_check_json_is_deterministic(specs, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        main(["check", str(specs["pendulum"]), "--seed", "42", "--json", str(path)])
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["meta"]["seed"] == 42


def test_check_flags_override(specs, tmp_path):
    out = tmp_path / "r.json"
    main(["check", str(specs["double_integrator"]), "--samples", "12", "--tol", "1e-6", "--json", str(out)])
    report = json.loads(out.read_text())
    assert report["meta"]["options"]["samples"] == 12
    assert report["meta"]["options"]["tol"] == 1e-6
    assert report["blocks"][1]["evidence"]["samples"] == 12


def test_check_inconclusive_exit(tmp_path):
    # the guard excludes every equilibrium jet but almost no random jet
    text = (FIXTURES / "defective_phi.flat").read_text()
    text = text.replace("phi = y0_1; y0_1", "phi = y0_1; y1_1\nguard = y1_1^2 >= 1e-6")
    path = tmp_path / "guarded.flat"
    path.write_text(text)
    assert main(["check", str(path), "--samples", "5"]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "does/not/exist.flat"],
        ["check"],
        ["frobnicate"],
        ["check", "x.flat", "--samples", "many"],
    ],
)
def test_usage_and_spec_errors_exit_2(argv):
    assert main(argv) == 2


def test_spec_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.flat"
    bad.write_text("[system]\nn = 2\nm = 1\nF = p1 - x2\nf = x2; u1\n[flat]\nr = 1\nphi = y0_1\n")
    assert main(["check", str(bad)]) == 2
    assert "flat.phi" in capsys.readouterr().err


def test_plan_outputs(specs, tmp_path):
    csv_path, json_path = tmp_path / "p.csv", tmp_path / "p.json"
    assert main(["plan", str(specs["double_integrator"]), "--grid", "100", "--csv", str(csv_path), "--json", str(json_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("t,y0_1,y1_1,y2_1,x1,x2,xdot1,xdot2,u1,residual")
    assert len(lines) == 102
    header = lines[0].split(",")
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        assert abs(float(row["u1"]) - float(row["y2_1"])) <= 1e-9
    payload = json.loads(json_path.read_text())
    assert payload["schema"] == "flatcert.trajectory.v1"
    assert payload["trajectory"]["all_inputs_recovered"] is True


@pytest.mark.parametrize("name", ["pendulum", "unicycle", "planar_mass_point"])
def test_plan_positive(name, specs):
    assert main(["plan", str(specs[name]), "--grid", "200"]) == 0


def test_plan_broken_fixture_fails(specs):
    assert main(["plan", str(specs["broken_phi_fixture"]), "--grid", "100"]) == 1


def test_plan_without_plan_section(tmp_path):
    assert main(["plan", str(FIXTURES / "defective_phi.flat")]) == 2


def test_plan_horizon_override(specs, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["plan", str(specs["pendulum"]), "--T", "4", "--grid", "10", "--csv", str(out)]) == 0
    assert out.read_text().splitlines()[-1].startswith("4.0,")


def test_console_script_entry_point(specs):
    proc = subprocess.run(
        [sys.executable, "-m", "flatcert.cli", "check", str(specs["double_integrator"]), "--samples", "10"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "CRITERION SATISFIED" in proc.stdout
