import json

import pytest

from towergen.cli import main, run, validate_config
from towergen.errors import ConfigInvalid
from towergen.presets import list_presets, preset_spec
from towergen.report import RunReport


def test_malformed_config_names_field():
    with pytest.raises(ConfigInvalid) as info:
        validate_config("tower-build", {"shapes": "nope"})
    assert "shapes" in str(info.value)
    with pytest.raises(ConfigInvalid) as info:
        validate_config("tower-build", {})
    assert info.value.path == "shapes"


def test_unknown_field_rejected():
    with pytest.raises(ConfigInvalid):
        validate_config("cover-estimate", {"k": 1, "bogus": 2})


def test_preset_catalog():
    catalog = list_presets()
    assert set(catalog) == {"T0", "T1", "T1b", "U2"}
    assert "21" in catalog["T1"]["claims"]
    assert catalog["U2"]["note"] is not None and "relaxed" in catalog["U2"]["note"]
    assert catalog["T1b"]["note"] is not None
    for name in catalog:
        spec = preset_spec(name)
        validate_config("tower-build", spec.to_json())


def test_gen_verify_t0_report():
    report = run("gen-verify", {"preset": "T0"})
    assert report.passed
    names = [r.name for r in report.rows]
    assert "corner_annihilates_coupling" in names
    assert "level1.coupling_norm_gap" in names


def test_error_path_structured_report():
    report = run("gen-construct", {"preset": "U2"})
    assert not report.passed
    assert report.error is not None and "InsufficientSubrank" in report.error


def test_report_determinism_small():
    r1 = run("gen-verify", {"preset": "T0"})
    r2 = run("gen-verify", {"preset": "T0"})
    assert r1.body_bytes() == r2.body_bytes()


def test_seed_changes_measurements():
    r1 = run("gen-construct", {"preset": "T0"})
    r2 = run("gen-construct", {"preset": "T0", "seed": 12345})
    c1 = [row.measured for row in r1.rows if row.name.endswith("coupling_scale")]
    c2 = [row.measured for row in r2.rows if row.name.endswith("coupling_scale")]
    assert c1 != c2


def test_cli_main_round_trip(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "T0"}))
    out = tmp_path / "report.json"
    code = main(["gen-verify", "--config", str(cfg), "--out", str(out), "--summary"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["pass"] is True
    assert payload["command"] == "gen-verify"
    assert "timing" in payload
    assert payload["artifact"]["name"] == "towergen"


def test_cli_main_config_invalid(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"shapes": [[0]]}))
    code = main(["tower-build", "--config", str(cfg)])
    assert code == 2


def test_cli_exit_code_on_failure(tmp_path):
    cfg = tmp_path / "u2.json"
    cfg.write_text(json.dumps({"preset": "U2"}))
    code = main(["gen-construct", "--config", str(cfg), "--out", str(tmp_path / "r.json")])
    assert code == 1


def test_cover_estimate_small():
    report = run("cover-estimate", {"k": 1, "omega": 0.5, "samples": 500})
    assert report.passed
    assert any("circle_oracle_lower" in r.name for r in report.rows)


def test_report_rows_have_required_keys():
    report = run("lemma52-check", {"runs": 2})
    body = report.body()
    for row in body["rows"]:
        assert {"name", "measured", "threshold", "pass"} <= set(row)
    assert body["pass"] is True


def test_stabilize_sweep_row_format():
    report = run("stabilize-sweep", {"shape": [3], "deltas": [1e-4], "seeds": 2})
    assert report.passed
    rows = report.extra["sweep"]
    assert len(rows) == 2
    assert {"delta", "seed", "max_distance", "defects_in", "defects_out"} <= set(rows[0])


def test_summary_lines_format():
    report = RunReport("demo", {})
    report.add("alpha", 1.0, 2.0, True)
    report.close()
    lines = report.summary_lines()
    assert lines[0].startswith("PASS")
    assert lines[-1].endswith("(demo)")
