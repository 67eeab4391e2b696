import csv
import json

import pytest

from ffpia import scenarios as sc


def cfg(**kw):
    base = {"shots": 20_000, "scan_points": 4000}
    base.update(kw)
    return sc.config_from_dict(base)


@pytest.mark.parametrize("name", sorted(sc.CATALOG))
def test_every_scenario_passes_by_default(name):
    rep = sc.run(cfg(scenario=name))
    assert rep.rows
    failed = [(r.case, r.quantity) for r in rep.rows if not r.passed]
    assert not failed


@pytest.mark.parametrize("name", ["pia-output-vacuum", "pia-epr", "clone-output",
                                  "clone-reconstruct", "pia-reconstruct-coherent"])
@pytest.mark.parametrize("extra", [{"ancilla_db": None}, {"imperfections": True},
                                   {"ancilla_db": 0.0}, {"engine": "analytic"}])
def test_variants_pass(name, extra):
    assert sc.run(cfg(scenario=name, **extra)).passed


def test_unknown_key_rejected():
    with pytest.raises(sc.ConfigError, match="unknown key 'gian'"):
        sc.config_from_dict({"scenario": "pia-epr", "gian": 2})


def test_gain_and_reflectivity_both_set():
    with pytest.raises(sc.ConfigError, match="both set"):
        sc.config_from_dict({"scenario": "pia-epr", "gain": 2.0, "reflectivity": 0.17})


def test_reflectivity_alone_is_accepted():
    c = sc.config_from_dict({"scenario": "pia-output-vacuum", "reflectivity": 0.5})
    assert c.gain is None and c.pia_params().G == pytest.approx(1.125)


@pytest.mark.parametrize("bad", [
    {"engine": "exact"}, {"ancilla_db": 3.0}, {"visibility": 1.5}, {"shots": 10},
    {"kl_pairs": [[3, 2]]}, {"excitations": [{"mode": "3", "axis": "x"}]}, {"seed": -1},
])
def test_validation_messages(bad):
    assert sc.validate_dict({"scenario": "pia-epr", **bad})


def test_parse_config_json_error():
    with pytest.raises(sc.ConfigError, match="line 1"):
        sc.parse_config("{bad")


def test_reconstruction_needs_gain_two():
    with pytest.raises(sc.ConfigError):
        sc.run(cfg(scenario="pia-reconstruct-vacuum", gain=3.0))


def test_report_is_byte_identical(tmp_path):
    a = sc.run(cfg(scenario="clone-phase-scan")).write(tmp_path / "a")
    b = sc.run(cfg(scenario="clone-phase-scan")).write(tmp_path / "b")
    for f in ("report.csv", "summary.json", "scan.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_report_columns(tmp_path):
    out = sc.run(cfg(scenario="pia-epr")).write(tmp_path)
    with open(out / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == sc.CSV_COLUMNS
    assert all(r["schema_version"] == "1" for r in rows)
    s = json.loads((out / "summary.json").read_text())
    assert s["passed"] and s["scenario"] == "pia-epr"


def test_scan_csv_columns(tmp_path):
    out = sc.run(cfg(scenario="pia-phase-scan")).write(tmp_path)
    head = (out / "scan.csv").read_text().splitlines()[0]
    assert head == "phase_rad,outcome,mode"


def test_different_seeds_differ():
    a = sc.run(cfg(scenario="pia-epr", seed=1)).rows[0].montecarlo
    b = sc.run(cfg(scenario="pia-epr", seed=2)).rows[0].montecarlo
    assert a != b


def test_row_pass_logic():
    r = sc.ReportRow("s", "c", "q", analytic=1.0, gaussian=1.0 + 1e-9)
    assert not r.passed
    r = sc.ReportRow("s", "c", "q", analytic=1.0, montecarlo=1.2, mc_stderr=0.01)
    assert not r.passed
    r = sc.ReportRow("s", "c", "q", analytic=1.0, reference=1.1, reference_tol=0.01)
    assert not r.passed
    r = sc.ReportRow("s", "c", "q", analytic=1.0, montecarlo=1.01, mc_stderr=0.01, reference=1.0,
                     reference_tol=1e-3)
    assert r.passed


def test_default_reference_values_present():
    rep = sc.run(cfg(scenario="pia-epr"))
    r = next(r for r in rep.rows if r.quantity == "x_minus_db")
    assert r.reference == -3.629 and r.passed
    rep = sc.run(cfg(scenario="pia-epr", ancilla_db=-3.0))
    r = next(r for r in rep.rows if r.quantity == "x_minus_db")
    assert r.reference is None


def test_seed_sweep_coverage():
    agg, summ = sc.seed_sweep(cfg(scenario="pia-output-vacuum"), range(20))
    assert summ["quantities"] == 4
    assert all(a["runs"] == 20 for a in agg)
    # nominal 95 % interval; allow sampling slack
    assert summ["min_coverage"] >= 0.75
    assert sc.sweep_to_csv(agg).startswith("schema_version,case,quantity")


def test_seed_sweep_needs_mc():
    with pytest.raises(sc.ConfigError):
        sc.seed_sweep(cfg(scenario="pia-epr", engine="analytic"), [1, 2])
