import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uda_ptlu.cli import main
from uda_ptlu.domain import validate_class
from uda_ptlu.examples import ExampleSpec, build_example
from uda_ptlu.io import canonical, class_to_dict, decode, dumps_csv, dumps_json, make_report, parse_csv

from conftest import raw_class, two_pair_class

DATA = Path(__file__).resolve().parents[1] / "data"


def test_canonical_floats_and_sentinels():
    out = canonical({"a": 1 / 3, "b": math.inf, "c": -math.inf, "d": np.float64(2.5), "e": np.arange(2), "f": (1, None)})
    assert out == {"a": 0.333333333333, "b": "Infinity", "c": "-Infinity", "d": 2.5, "e": [0, 1], "f": [1, None]}
    assert decode(out)["b"] == math.inf and decode(out)["c"] == -math.inf


@given(st.floats(allow_nan=False))
def test_float_round_trip_through_both_formats(x):
    report = make_report("t", {}, [{"value": x}])
    from_json = decode(json.loads(dumps_json(report))["result"])[0]["value"]
    from_csv = parse_csv(dumps_csv(report))[0]["value"]
    assert from_json == from_csv
    if math.isinf(x):
        assert from_json == x
    else:
        assert from_json == pytest.approx(x, rel=1e-11, abs=0)


def test_class_file_round_trip(tmp_path):
    pi = two_pair_class()
    again = validate_class(json.loads(json.dumps(class_to_dict(pi))))
    np.testing.assert_array_equal(again.family.tables, pi.family.tables)
    np.testing.assert_array_equal(again.prior_matrix, pi.prior_matrix)
    assert all(a.p == b.p and a.q == b.q for a, b in zip(again.entries, pi.entries))


def _run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out.read_text() if out.exists() else None


def test_analyze_pregenerated_example1(tmp_path):
    for which, expected in ((1, 0.0), (2, 0.125)):
        code, text = _run(["analyze", str(DATA / f"example1_class{which}.json")], tmp_path)
        assert code == 0
        assert json.loads(text)["result"]["R_star_infinite"] == pytest.approx(expected, abs=2 / 360)


def test_analyze_point_mass_file(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(raw_class(prior={"f0": 1.0})))
    code, text = _run(["analyze", str(path)], tmp_path)
    res = json.loads(text)["result"]
    assert code == 0 and res["R_star_infinite"] == 0.0
    assert all(o["e_star"] == 0 and o["ptlu"] == 0 and o["fano_bound"] == 0 for o in res["observations"])


def test_measures_kl_infinity_in_csv(tmp_path):
    code, text = _run(["measures", str(DATA / "example1_class1.json"), "--which", "kl", "--format", "csv"], tmp_path)
    assert code == 0
    assert parse_csv(text) == [{"measure": "kl", "value": math.inf, "witness": None}]
    assert "Infinity" in text


def test_empty_sample(tmp_path):
    code, text = _run(["sample", str(DATA / "example1_class1.json"), "--m", "0", "--n", "0"], tmp_path)
    res = json.loads(text)["result"]
    assert code == 0 and res["xs"] == [] and res["ys"] == [] and res["xt"] == []


def test_bounds_on_random_class(tmp_path):
    code, text = _run(["bounds", "--trials", "1000", "--seed", "5"], tmp_path)
    res = json.loads(text)["result"]
    assert code == 0 and res["violations"] == 0 and res["fano_violations"] == 0


def test_posterior_from_sample_file(tmp_path):
    cls = str(DATA / "example1_class2.json")
    _run(["sample", cls, "--m", "4", "--n", "3", "--seed", "2"], tmp_path, "s.json")
    code, text = _run(["posterior", cls, "--sample", str(tmp_path / "s.json")], tmp_path)
    res = json.loads(text)["result"]
    assert code == 0
    assert sum(r["probability"] for r in res["posterior"]) == pytest.approx(1.0, abs=1e-9)
    for row in res["aggregate"]:
        assert row["p[0]"] + row["p[1]"] == pytest.approx(1.0, abs=1e-9)


def test_examples_json_and_csv_agree(tmp_path):
    args = ["examples", "--id", "2", "--resolution", "72"]
    _, js = _run([*args, "--format", "json"], tmp_path, "a.json")
    _, cs = _run([*args, "--format", "csv"], tmp_path, "a.csv")
    rows_json = decode(json.loads(js)["result"])
    rows_csv = parse_csv(cs)
    assert len(rows_json) == len(rows_csv) == 16
    for a, b in zip(rows_json, rows_csv):
        a = {k: (None if v == "" else v) for k, v in a.items()}
        assert a == b


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw_class(weights=(0.6, 0.5))))
    assert main(["analyze", str(bad)]) == 1
    assert main(["analyze", str(tmp_path / "missing.json")]) == 1
    assert main(["measures", str(DATA / "example1_class1.json"), "--which", "nope"]) == 1
    with pytest.raises(SystemExit) as err:
        main(["examples", "--id", "7"])
    assert err.value.code == 1
    toy = tmp_path / "toy.json"
    toy.write_text(json.dumps(raw_class()))
    assert main(["measures", str(toy), "--which", "wasserstein"]) == 2  # discrete domain has no metric
    sample = tmp_path / "s.json"
    sample.write_text(json.dumps({"result": {"entry": 0, "f": "f0", "xs": [2], "ys": [0], "xt": []}}))
    assert main(["posterior", str(toy), "--sample", str(sample)]) == 2  # point 2 is outside the source
    assert "ZeroEvidence" in capsys.readouterr().err


COMMANDS = [
    ["analyze", "{ex1}"],
    ["sample", "{ex1}", "--m", "5", "--n", "5", "--seed", "3"],
    ["posterior", "{ex1}", "--m", "5", "--n", "5", "--seed", "3"],
    ["bounds", "--trials", "50", "--seed", "3", "--k", "3"],
    ["measures", "{ex1}", "--chart-start", "-180"],
    ["examples", "--id", "3", "--resolution", "40"],
    ["converge", "{ex1}", "--schedule", "5:5,20:20", "--trials", "5", "--seed", "3"],
]


@pytest.mark.parametrize("fmt", ["json", "csv"])
@pytest.mark.parametrize("cmd", COMMANDS, ids=lambda c: c[0])
def test_commands_are_deterministic(tmp_path, cmd, fmt):
    args = [a.format(ex1=DATA / "example1_class2.json") for a in cmd] + ["--format", fmt]
    code1, first = _run(args, tmp_path, "one")
    code2, second = _run(args, tmp_path, "two")
    assert code1 == code2 == 0
    assert first == second


def test_console_script_and_thread_cap(tmp_path):
    env = dict(os.environ, UDA_THREADS="1")
    out = subprocess.run(
        [sys.executable, "-m", "uda_ptlu.cli", "examples", "--id", "4", "--resolution", "16", "--which", "PTLU"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert json.loads(out.stdout)["result"][0]["computed"] == 0.0


def test_export_class_round_trips(tmp_path):
    path = tmp_path / "ex3.json"
    assert main(["examples", "--id", "3", "--class", "2", "--resolution", "16", "--which", "kl", "--export-class", str(path), "--out", str(tmp_path / "r.json")]) == 0
    from uda_ptlu.io import load_class

    loaded = load_class(path)
    built = build_example(ExampleSpec(3, 16, 2)).pi
    np.testing.assert_array_equal(loaded.family.tables, built.family.tables)
