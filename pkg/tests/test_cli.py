import csv
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from rotor.cli import dumps, main, run_scenario
from rotor.errors import ParseError
from rotor.scenario import load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
SCHEMA_FOR = {
    "capture_set.json": "capture_set.v1.json",
    "degree.json": "degree.v1.json",
    "orbits.json": "orbits.v1.json",
    "report.json": "report.v1.json",
}


def schema(name):
    return json.loads(resources.files("rotor").joinpath("schemas", name).read_text())


def validate_bundle(out: Path):
    seen = 0
    for name, schema_name in SCHEMA_FOR.items():
        path = out / name
        if path.exists():
            jsonschema.validate(json.loads(path.read_text()), schema(schema_name))
            seen += 1
    return seen


def test_schemas_are_valid_documents():
    for name in SCHEMA_FOR.values():
        jsonschema.Draft202012Validator.check_schema(schema(name))


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.toml")), ids=lambda p: p.stem)
def test_bundled_scenarios_parse(path):
    scen = load_scenario(path)
    assert scen.region.contains((0.0, 0.0))
    assert scen.build_field().T == pytest.approx(2 * math.pi)


def test_malformed_toml_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\nT = = 3\n')
    with pytest.raises(ParseError) as info:
        load_scenario(bad)
    assert info.value.line == 2
    assert main(["grid", str(bad)]) != 0
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    'T = "2*pi"\n[field]\nkind = "nope"\n',
    'T = "2*pi"\n[field]\nkind = "expr"\nf = "x^3 + z"\n',
    'T = "2*pi"\n[field]\nkind = "expr"\nf = "x^3 + sin(t/3)*x"\n',
    'T = "2*pi"\n[field]\nkind = "linear"\n[region]\nxmin = 1.0\nxmax = 2.0\nymin = -1.0\nymax = 1.0\n',
])
def test_invalid_scenarios(text):
    with pytest.raises(ParseError):
        parse_scenario(text)


def test_rotate_linear_1(capsys):
    assert main(["rotate", str(SCENARIOS / "linear_1.toml"), "--z", "1,0"]) == 0
    assert abs(float(capsys.readouterr().out.strip()) - 1.0) < 1e-9


def test_linear_15_bundle(tmp_path):
    bundle = run_scenario(SCENARIOS / "linear_15.toml", out_dir=tmp_path)
    assert bundle.ok
    degree = json.loads((tmp_path / "degree.json").read_text())
    assert degree["degree"] == 1
    orbits = json.loads((tmp_path / "orbits.json").read_text())["orbits"]
    assert len(orbits) == 1 and math.hypot(*orbits[0]["z_star"]) < 1e-9
    assert validate_bundle(tmp_path) == 4  # the circle boundary is written as capture_set.json too
    with open(tmp_path / "rotation_grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 256 and {r["status"] for r in rows} == {"finite"}
    assert all(abs(float(r["rho"]) - 1.5) < 1e-8 for r in rows)
    svg = (tmp_path / "rotation_heatmap.svg").read_text()
    assert svg.startswith("<svg") and "clockwise positive" in svg
    assert "clockwise positive" in (tmp_path / "portrait.svg").read_text()


def test_threads_do_not_change_outputs(tmp_path):
    a, b = tmp_path / "one", tmp_path / "three"
    assert main(["run", str(SCENARIOS / "linear_15.toml"), "--out", str(a), "--threads", "1"]) == 0
    assert main(["run", str(SCENARIOS / "linear_15.toml"), "--out", str(b), "--threads", "3"]) == 0
    for name in ("rotation_grid.csv", "degree.json", "orbits.json", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_stage_failure_is_reported(tmp_path):
    # linear(1): every point is fixed, so the degree stage cannot certify anything
    text = (SCENARIOS / "linear_1.toml").read_text().replace('stages = ["grid"]', 'stages = ["grid", "degree"]')
    scen = parse_scenario(text)
    bundle = run_scenario(scen, out_dir=tmp_path)
    assert not bundle.ok
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["stages"]["degree"]["status"] != "ok"
    assert report["stages"]["grid"]["status"] == "ok"
    assert validate_bundle(tmp_path) >= 1


@pytest.fixture(scope="module")
def duffing_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("duffing")
    return run_scenario(SCENARIOS / "duffing.toml", out_dir=out), out


def test_duffing_pipeline(duffing_bundle):
    bundle, out = duffing_bundle
    assert bundle.ok
    orbits = json.loads((out / "orbits.json").read_text())["orbits"]
    main_orbits = [o for o in orbits if "newton_seed" in o["sources"]]
    assert len(main_orbits) == 1
    orbit = main_orbits[0]
    assert orbit["residual"] < 1e-9 and orbit["verified_residual"] < 1e-8
    assert "bisection" in orbit["sources"]
    assert json.loads((out / "degree.json").read_text())["degree"] == 1
    assert validate_bundle(out) == 4


def test_duffing_hypotheses(duffing_bundle):
    _, out = duffing_bundle
    hyps = {r["hypothesis"]: r["verdict"] for r in json.loads((out / "report.json").read_text())["hypotheses"]}
    for name in ("A3", "A4", "A5", "A5star", "SuperEst"):
        assert hyps[name] == "ConsistentOnSamples"


def test_check_command_prints_table(tmp_path, capsys):
    # a violated hypothesis is a finding, not a failed stage
    assert main(["check", str(SCENARIOS / "linear_15.toml"), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "A3" in text and "ViolatedAt" in text and "A5" in text


def test_reverse_check_command(capsys):
    assert main(["reverse-check", str(SCENARIOS / "duffing.toml"), "--samples", "5"]) == 0
    assert "max difference" in capsys.readouterr().out


def test_json_output_is_canonical():
    text = dumps({"b": 1.0, "a": [math.inf, (1, 2)], "c": float("nan")})
    assert json.loads(text) == {"a": [None, [1, 2]], "b": 1.0, "c": None}
    assert text.index('"a"') < text.index('"b"')


def test_bad_threads_is_a_usage_error(tmp_path):
    assert main(["grid", str(SCENARIOS / "linear_1.toml"), "--threads", "0", "--out", str(tmp_path)]) == 2


def test_threads_environment_default(monkeypatch):
    from rotor import _parallel
    monkeypatch.setenv("ROTOR_THREADS", "4")
    assert _parallel.default_threads() == 4
    monkeypatch.setenv("ROTOR_THREADS", "junk")
    assert _parallel.default_threads() == 1
