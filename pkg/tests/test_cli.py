import json
from pathlib import Path

import pytest
import yaml

from failsim.cli import EXIT_ENGINE, EXIT_OK, EXIT_VALIDATION, main
from failsim.dist import Exponential
from failsim.scenario import ScenarioError, apply_overrides, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write_yaml(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def small_restart_doc(n=2000, seed=3):
    return {
        "model": "restart",
        "process": {"kind": "renewal", "size": "exp(2)"},
        "marks": "exp(1)",
        "run": {"iterations": n, "seed": seed},
        "output": {"curve_points": 10},
    }


def test_all_shipped_scenarios_validate():
    for path in sorted(SCENARIOS.glob("*.yaml")):
        assert main(["validate", str(path)]) == EXIT_OK, path.name


def test_validate_rejects_bad_distribution(tmp_path):
    doc = small_restart_doc()
    doc["marks"] = "gauss(0,1)"
    path = write_yaml(tmp_path / "bad.yaml", doc)
    assert main(["validate", path]) == EXIT_VALIDATION


def test_validate_rejects_missing_field(tmp_path):
    doc = small_restart_doc()
    del doc["run"]["iterations"]
    path = write_yaml(tmp_path / "bad.yaml", doc)
    assert main(["validate", path]) == EXIT_VALIDATION


def test_run_writes_artifacts(tmp_path):
    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["model"] == "restart"
    assert summary["n_iterations"] == 2000
    assert (out / "curve.csv").exists()
    assert (out / "rep_0_trace.csv").exists()


def test_rerun_is_byte_identical(tmp_path):
    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--out", str(out1)]) == EXIT_OK
    assert main(["run", path, "--out", str(out2)]) == EXIT_OK
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_seed_changes_summary(tmp_path):
    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--out", str(out1)]) == EXIT_OK
    assert main(["run", path, "--seed", "99", "--out", str(out2)]) == EXIT_OK
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    assert s1["seed"] != s2["seed"]
    assert s1["estimates"] != s2["estimates"]


def test_override_plumbing(tmp_path):
    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    out = tmp_path / "out"
    rc = main(["run", path, "--override", "N=500", "--out", str(out)])
    assert rc == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_iterations"] == 500


def test_engine_error_exit_code(tmp_path):
    # equal size/mark rates with a tiny attempt cap must fail loudly
    doc = small_restart_doc(n=5000)
    doc["process"]["size"] = "exp(1)"
    doc["run"]["attempt_cap"] = 50
    path = write_yaml(tmp_path / "s.yaml", doc)
    assert main(["run", path, "--out", str(tmp_path / "out")]) == EXIT_ENGINE


def test_compare_runs(tmp_path, capsys):
    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    assert main(["compare", path]) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_summary_validates_against_schema(tmp_path):
    import jsonschema
    from importlib import resources

    path = write_yaml(tmp_path / "s.yaml", small_restart_doc())
    out = tmp_path / "out"
    assert main(["run", path, "--out", str(out)]) == EXIT_OK
    schema = json.loads(
        resources.files("failsim").joinpath("schemas/summary.schema.json").read_text()
    )
    jsonschema.validate(json.loads((out / "summary.json").read_text()), schema)


# ---- scenario-document level tests ----


def test_load_scenario_parses_laws():
    sc = load_scenario(small_restart_doc())
    assert isinstance(sc.size_law, Exponential)
    assert sc.size_law.rate == 2.0
    assert sc.iterations == 2000
    assert sc.attempt_cap == 1_000_000_000


def test_attempt_cap_zero_means_unlimited():
    doc = small_restart_doc()
    doc["run"]["attempt_cap"] = 0
    assert load_scenario(doc).attempt_cap is None


def test_error_names_field_path():
    doc = small_restart_doc()
    doc["run"]["iterations"] = -2
    with pytest.raises(ScenarioError) as exc:
        load_scenario(doc)
    assert "run.iterations" in str(exc.value)


def test_universal_requires_exponential_marks():
    doc = {
        "model": "universal",
        "process": {"kind": "renewal", "size": "exp(1)"},
        "marks": "weibull(1,2)",
        "run": {"iterations": 1000, "lookback": 100},
    }
    with pytest.raises(ScenarioError):
        load_scenario(doc)


def test_bounded_size_rejected_for_restart():
    doc = small_restart_doc()
    doc["process"]["size"] = "det(2)"
    with pytest.raises(ScenarioError):
        load_scenario(doc)


def test_apply_overrides_aliases_and_paths():
    doc = small_restart_doc()
    out = apply_overrides(doc, ["N=77", "seed=5", "process.size=exp(3)"])
    assert out["run"]["iterations"] == 77
    assert out["run"]["seed"] == 5
    assert out["process"]["size"] == "exp(3)"
    # original untouched
    assert doc["run"]["iterations"] == 2000


def test_apply_overrides_rejects_malformed():
    with pytest.raises(ScenarioError):
        apply_overrides(small_restart_doc(), ["not-an-assignment"])


def test_scenario_hash_tracks_content():
    a = load_scenario(small_restart_doc())
    doc = small_restart_doc()
    doc["run"]["seed"] = 12345
    b = load_scenario(doc)
    assert a.hash() != b.hash()
    assert a.hash() == load_scenario(small_restart_doc()).hash()
