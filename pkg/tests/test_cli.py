import argparse
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvforge.cli import build_parser, load_manifest, main, parse_complex, parse_real, parse_reals
from cvforge.optimize import catalog_load


def _result(out):
    return json.loads((Path(out) / "result.json").read_text())["result"]


@pytest.mark.parametrize("text, value", [
    ("0.5", 0.5),
    ("sqrt(pi)/2", math.sqrt(math.pi) / 2),
    ("2*sqrt(pi)", 2 * math.sqrt(math.pi)),
    ("sqrt(2*pi)", math.sqrt(2 * math.pi)),
    ("-1e-3", -1e-3),
    ("10**(11.5/20)", 10 ** (11.5 / 20)),
])
def test_parse_real(text, value):
    assert parse_real(text) == value


@pytest.mark.parametrize("text", ["__import__('os')", "1/0", "pi(", "x", "inf*2", "sqrt(-1)"])
def test_parse_real_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_real(text)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_parse_real_roundtrips_repr(v):
    assert parse_real(repr(v)) == v


def test_parse_lists_and_complex():
    assert parse_reals("0, 0.093") == [0.0, 0.093]
    assert parse_reals("") == []
    assert parse_complex("0.5+0.5j") == 0.5 + 0.5j
    assert parse_complex("sqrt(1/2),-1") == complex(math.sqrt(0.5), -1)


def test_every_subcommand_exists():
    names = set(build_parser().subcommands)
    assert {"decompose", "gkp-cond", "gkp-magic", "cz", "mf", "logical", "loss", "optimize", "wigner",
            "manifest"} <= names


def test_decompose_outputs(tmp_path, capsys):
    assert main(["decompose", "--set", "L3_square", "--t", "sqrt(pi)/2", "--out-dir", str(tmp_path)]) == 0
    r = sorted(_result(tmp_path)["cubic_strengths"])
    np.testing.assert_allclose(r, sorted([0.0643, 0.0643, 0.0872, 0.0872, 0.1304, 0.1304, -0.1085]), atol=1e-3)
    assert "cubic strengths" in capsys.readouterr().out
    assert json.loads((tmp_path / "circuit.json").read_text())


def test_empty_set_gives_empty_circuit(tmp_path):
    assert main(["decompose", "--set", "0,0", "--out-dir", str(tmp_path)]) == 0
    assert _result(tmp_path)["gates"] == 0


@pytest.mark.parametrize("argv", [
    ["decompose", "--set", "no_such_set"],
    ["decompose", "--bogus"],
    ["gkp-cond", "--set", "square_L3", "--k", "3", "--db", "10"],
    ["wigner", "--state", "fock:-1"],
    ["manifest", "--run", "not_an_id"],
])
def test_bad_input_exits_2(tmp_path, argv):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 2


def test_failed_cross_check_exits_1(tmp_path):
    # a 10-photon truncation cannot reproduce a comb at 10 dB
    argv = ["wigner", "--state", "gkp", "--db", "10", "--compare", "--cutoff", "10", "--grid", "21",
            "--points", "2048", "--out-dir", str(tmp_path)]
    assert main(argv) == 1


def test_vacuum_wigner_origin(tmp_path):
    assert main(["wigner", "--out-dir", str(tmp_path), "--grid", "41", "--compare", "--svg"]) == 0
    res = _result(tmp_path)
    assert res["w_origin"] == pytest.approx(1 / math.pi, rel=1e-6)
    assert res["compare"]["sup_norm"] < 1e-2
    assert (tmp_path / "wigner.svg").read_text().startswith("<svg")


@pytest.mark.parametrize("state", ["fock:3", "coherent:1,0.5", "squeezed:0.4"])
def test_wigner_routes_agree(tmp_path, state):
    assert main(["wigner", "--state", state, "--grid", "31", "--compare", "--out-dir", str(tmp_path)]) == 0
    assert _result(tmp_path)["compare"]["sup_norm"] < 1e-6


def test_csv_reruns_are_byte_identical(tmp_path):
    argv = ["gkp-cond", "--set", "square_L3", "--probability", "0.002", "--points", "2001"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out-dir", str(a)]) == 0
    assert main(argv + ["--out-dir", str(b)]) == 0
    for name in ("windows.csv", "wavefunction.csv"):
        la = (a / name).read_text().splitlines()
        lb = (b / name).read_text().splitlines()
        assert la[0].startswith("# cvforge")
        assert la[1:] == lb[1:]


def test_full_line_window_has_unit_probability(tmp_path):
    assert main(["gkp-cond", "--set", "square_L3", "--full-line", "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "windows.csv").read_text().splitlines()
    header = rows[1].split(",")
    prob = float(rows[2].split(",")[header.index("probability")])
    assert prob == pytest.approx(1.0, abs=1e-6)


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"set": "square_L3", "strategy": "equal"}))
    out = tmp_path / "o"
    assert main(["decompose", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert _result(out)["strategy"] == "equal"
    assert main(["decompose", "--config", str(cfg), "--strategy", "min", "--out-dir", str(out)]) == 0
    assert _result(out)["strategy"] == "min_strength"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert main(["decompose", "--config", str(cfg), "--out-dir", str(out)]) == 2
    assert main(["decompose", "--config", str(tmp_path / "missing.json"), "--out-dir", str(out)]) == 2


def test_manifest_entries_parse():
    parser = build_parser()
    entries = load_manifest()
    assert len({e["id"] for e in entries}) == len(entries)
    for e in entries:
        args = parser.parse_args(e["argv"])
        assert args.command == e["argv"][0]
        assert e["outputs"]


def test_manifest_runs_fast_entry(tmp_path):
    assert main(["manifest", "--run", "gates_L3_equal", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "gates_L3_equal" / "circuit.json").exists()


def test_optimize_writes_catalog(tmp_path, monkeypatch):
    cat = tmp_path / "catalog.json"
    monkeypatch.setenv("CVFORGE_CATALOG", str(cat))
    argv = ["optimize", "--seed-m", "2", "--seed-order", "1", "--objective", "supnorm", "--t", "0.5",
            "--hops", "2", "--batch", "2", "--budget", "30", "--name", "tiny", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    assert [s.name for s in catalog_load(str(cat))] == ["tiny"]
    first = _result(tmp_path)["set"]["entries"]
    assert main(argv) == 2
    assert main(argv + ["--replace"]) == 0
    assert _result(tmp_path)["set"]["entries"] == first
