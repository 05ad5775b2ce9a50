import json
import subprocess
import sys

import jsonschema
import pytest

from markovclt import gallery
from markovclt.chain import classify, load_chain_spec
from markovclt.cli import main
from markovclt.report import dumps_csv, flatten, load_schema, strip_timings, validate_report


@pytest.fixture
def two_state_spec(tmp_path):
    path = tmp_path / "two.json"
    assert main(["gallery", "two-state", "--p", "0.3", "--out", str(path)]) == 0
    return path


def analyze(spec, tmp_path, *extra, name="r.json"):
    out = tmp_path / name
    code = main(["analyze", str(spec), "--horizon", "256", "--paths", "500", "--out", str(out), *extra])
    return code, out


def test_analyze_two_state(two_state_spec, tmp_path):
    code, out = analyze(two_state_spec, tmp_path)
    assert code == 0
    rep = json.loads(out.read_text())
    validate_report(rep)
    rows = {r["condition_id"]: r for r in rep["conditions"]}
    assert rows["C1"]["verdict"] == rows["C2"]["verdict"] == "convergent"
    assert rep["variance"]["sigma2"] == pytest.approx(0.7 / 0.3, abs=1e-9)
    assert rep["settings"]["horizon"] == 256
    assert rep["settings"]["tolerances"]["negligible"] == 1e-13
    assert rep["chain_fingerprint"].startswith("sha256:")
    assert [t["statistic_kind"] for t in rep["clt"]["tests"]] == ["raw", "centered"]


def test_analyze_deterministic(two_state_spec, tmp_path):
    _, a = analyze(two_state_spec, tmp_path, "--seed", "7", name="a.json")
    _, b = analyze(two_state_spec, tmp_path, "--seed", "7", "--workers", "3", name="b.json")
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert json.dumps(strip_timings(ja), sort_keys=True) == json.dumps(strip_timings(jb), sort_keys=True)
    _, c = analyze(two_state_spec, tmp_path, "--seed", "8", name="c.json")
    assert strip_timings(json.loads(c.read_text()))["clt"] != strip_timings(ja)["clt"]


def test_analyze_csv_is_flat_projection(two_state_spec, tmp_path):
    code, out = analyze(two_state_spec, tmp_path, "--format", "csv", name="r.csv")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "key,value"
    keys = [line.split(",", 1)[0] for line in lines[1:]]
    assert "conditions.C1.verdict" in keys and "variance.sigma2" in keys


def test_flatten_roundtrip_keys():
    rep = {"a": [{"condition_id": "X", "v": 1.5}], "b": None}
    assert flatten(rep) == [("a.X.condition_id", "X"), ("a.X.v", 1.5), ("b", None)]
    assert dumps_csv(rep).splitlines()[-1] == "b,"


def test_side_csvs(two_state_spec, tmp_path):
    v, p = tmp_path / "v.csv", tmp_path / "p.csv"
    code, _ = analyze(two_state_spec, tmp_path, "--variance-csv", str(v), "--paths-csv", str(p))
    assert code == 0
    assert len(v.read_text().splitlines()) == 257
    assert len(p.read_text().splitlines()) == 501


def test_malformed_kernel_exit_2(tmp_path, capsys):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"kernel": [[0.5, 0.4], [0.5, 0.5]], "observable": [1, -1]}))
    assert main(["analyze", str(spec)]) == 2
    assert "kernel row 0" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["gallery", "two-state", "--p", "1.0"],
        ["gallery", "cycle-walk", "--size", "2"],
        ["gallery", "iid", "--size", "1"],
        ["gallery", "iid", "--p", "0.3"],
        ["gallery", "birth-death", "--p", "0"],
    ],
)
def test_gallery_bad_params_exit_2(argv, tmp_path):
    assert main([*argv, "--out", str(tmp_path / "x.json")]) == 2


def test_analyze_input_errors(tmp_path, two_state_spec):
    assert main(["analyze", str(tmp_path / "missing.json")]) == 2
    assert main(["analyze", str(two_state_spec), "--horizon", "8"]) == 2
    assert main(["analyze", str(two_state_spec), "--paths", "-1"]) == 2


def test_resource_cap_exit_3(two_state_spec, tmp_path):
    assert main(["analyze", str(two_state_spec), "--horizon", "8192", "--out", str(tmp_path / "x")]) == 3
    big = tmp_path / "big.json"
    assert main(["gallery", "random-dense", "--size", "600", "--out", str(big)]) == 0
    assert main(["analyze", str(big), "--horizon", "64", "--out", str(tmp_path / "y")]) == 3


def test_gallery_specs_validate_and_classify(tmp_path):
    schema = load_schema("chain-spec")
    expected = {
        "cycle-walk": dict(normal=True, reversible=False),
        "birth-death": dict(reversible=True),
        "iid": dict(reversible=True),
        "random-dense": dict(normal=False),
        "two-state": dict(reversible=True),
    }
    for name, props in expected.items():
        out = tmp_path / f"{name}.json"
        assert main(["gallery", name, "--out", str(out)]) == 0
        jsonschema.validate(json.loads(out.read_text()), schema)
        c = classify(load_chain_spec(out))
        for k, v in props.items():
            assert getattr(c, k) == v, (name, k)


def test_periodic_chain_skips_simulation(tmp_path):
    from markovclt.chain import dump_chain_spec

    spec = tmp_path / "cyc.json"
    dump_chain_spec(gallery.deterministic_cycle(), spec)
    code, out = analyze(spec, tmp_path)
    assert code == 0
    rep = json.loads(out.read_text())
    validate_report(rep)
    assert rep["clt"]["skipped"] and rep["variance"]["eta2"] is None
    assert rep["variance"]["sigma2"] == pytest.approx(0.0, abs=1e-12)


def test_lemmas_command(tmp_path, capsys):
    out = tmp_path / "l.json"
    assert main(["lemmas", "--cases", "5", "--seed", "2", "--M", "128", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep)
    assert rep["all_pass"]
    s = rep["campaigns"][0]
    assert main(["lemmas", "--replay", s["lemma_id"], str(s["worst_seed"]), "--M", "128"]) == 0
    assert repr(s["worst_ratio"]) in capsys.readouterr().out


def test_lemmas_zero_cases(tmp_path):
    out = tmp_path / "l0.json"
    assert main(["lemmas", "--cases", "0", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep)
    assert all(c["n_cases"] == 0 for c in rep["campaigns"])


def test_schema_rejects_broken_report(two_state_spec, tmp_path):
    _, out = analyze(two_state_spec, tmp_path)
    rep = json.loads(out.read_text())
    rep["conditions"][0]["verdict"] = "maybe"
    with pytest.raises(jsonschema.ValidationError):
        validate_report(rep)


def test_console_entry_point(tmp_path):
    out = tmp_path / "iid.json"
    proc = subprocess.run(
        [sys.executable, "-m", "markovclt.cli", "gallery", "iid", "--out", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0 and out.exists()
