import pytest

from flatcert.catalog import ENTRIES, catalog_text, load_entry, write_entry
from flatcert.errors import DimensionError, SpecError, SpecParseError, UnknownCatalogEntry, UnknownKey
from flatcert.specfile import load_spec, parse_spec

DI = """\
[system]
n = 2
m = 1
F = p1 - x2
f = x2; u1

[flat]
r = 1
phi = y0_1; y1_1
"""


def test_catalog_double_integrator_dimensions(catalog):
    spec = catalog["double_integrator"]
    assert (spec.system.n, spec.system.m, spec.flat.r) == (2, 1, 1)
    assert spec.plan is not None and spec.plan.T == 1.0


def test_every_catalog_entry_round_trips(tmp_path):
    assert len(ENTRIES) == 5
    for name in ENTRIES:
        path = write_entry(name, tmp_path)
        spec = load_spec(path)
        assert spec.name == name
        assert spec.sha256 == load_entry(name).sha256
        assert path.read_text() == catalog_text(name)


def test_unknown_catalog_entry():
    with pytest.raises(UnknownCatalogEntry):
        load_entry("nonexistent")


def test_minimal_spec_defaults():
    spec = parse_spec(DI)
    assert spec.check.samples == 100 and spec.check.seed == 0
    assert spec.plan is None and spec.guard is None and spec.psi is None


def test_phi_length_mismatch_names_key():
    with pytest.raises(DimensionError) as info:
        parse_spec(DI.replace("phi = y0_1; y1_1", "phi = y0_1"))
    assert "flat.phi" in str(info.value)
    assert info.value.section == "flat"
    assert info.value.line == 9


def test_F_length_mismatch():
    with pytest.raises(DimensionError) as info:
        parse_spec(DI.replace("F = p1 - x2", "F = p1 - x2; p2"))
    assert "system.F" in str(info.value)


def test_guard_may_reference_top_level():
    spec = parse_spec(DI + "guard = y2_1^2 >= 0\n")
    assert spec.guard is not None


def test_phi_may_not_reference_top_level():
    with pytest.raises(SpecParseError) as info:
        parse_spec(DI.replace("phi = y0_1; y1_1", "phi = y0_1; y2_1"))
    assert info.value.line == 9


@pytest.mark.parametrize(
    "extra, section",
    [("bogus = 1\n", "flat"), ("[weird]\nx = 1\n", "weird")],
)
def test_unknown_keys_and_sections(extra, section):
    with pytest.raises(UnknownKey) as info:
        parse_spec(DI + extra)
    assert info.value.section == section


def test_malformed_lines():
    with pytest.raises(SpecParseError):
        parse_spec(DI + "just text\n")
    with pytest.raises(SpecParseError):
        parse_spec("n = 2\n" + DI)
    with pytest.raises(SpecParseError):
        parse_spec(DI.replace("n = 2", "n = two"))


def test_missing_required_key():
    with pytest.raises(SpecError):
        parse_spec(DI.replace("f = x2; u1\n", ""))


def test_bad_expression_reports_line():
    with pytest.raises(SpecParseError) as info:
        parse_spec(DI.replace("F = p1 - x2", "F = p1 - - "))
    assert info.value.line == 4 and info.value.section == "system"


def test_plan_jet_shape_checked():
    with pytest.raises(SpecError):
        parse_spec(DI + "[plan]\nstart = 0; 0\nend = 1; 0; 0\n")


def test_check_options_parsed():
    spec = parse_spec(DI + "[check]\nsamples = 7\ntol = 1e-6\nseed = 3\n")
    assert (spec.check.samples, spec.check.tol, spec.check.seed) == (7, 1e-6, 3)


def test_defective_fixture_loads(defective_spec):
    assert defective_spec.flat.r == 1 and defective_spec.system.n == 2
