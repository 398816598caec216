import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ria.harness import io as rio
from ria.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from ria.harness.config import ConfigError, format_gain, parse_gain, parse_gain_matrix, validate
from ria.harness.scenarios import farey, gain_scan, gamma_check, quadratic_irrational
from ria.numerics import QuadField, default_precision, set_default_precision


def write_cfg(tmp_path, **kw):
    raw = {"version": 1, "sigma2": 1.0, "seed": 0, "out": str(tmp_path / "out"), **kw}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    return p


def test_missing_sigma2_is_config_error(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"version": 1, "scenario": "gamma-check", "seed": 0, "out": str(tmp_path / "o")}))
    assert main(["gamma-check", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["error"] == "config" and "sigma2" in err["message"] and err["exit_code"] == 2


def test_validation_rules():
    base = {"version": 1, "sigma2": 1.0, "seed": 0}
    with pytest.raises(ConfigError):
        validate({**base, "scenario": "x-channel", "gains": [["1", "2"], ["3", "4"]], "P": [1e4, 1e4, 1e6]})
    with pytest.raises(ConfigError):
        validate({**base, "scenario": "x-channel", "P": [1e4, 1e6, 1e8]})
    with pytest.raises(ConfigError):
        validate({**base, "scenario": "no-such"})
    with pytest.raises(ConfigError):
        validate({**base, "scenario": "gamma-check", "bogus": 1})
    cfg = validate({**base, "scenario": "gamma-check"})
    assert cfg.digest() == validate({"seed": 0, "sigma2": 1.0, "scenario": "gamma-check", "version": 1}).digest()


def test_bad_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_gain_literals():
    K = QuadField(2, 3)
    assert parse_gain("3/2") == Fraction(3, 2)
    assert parse_gain({"field": [2, 3], "coords": [0, 1, 0, 0]}) == K.sqrt(2)
    assert format_gain(K.sqrt(2)) == "sqrt2"
    assert format_gain(Fraction(3, 2)) == "3/2"
    g = parse_gain_matrix([["1", {"field": [2, 3], "coords": [0, 1, 0, 0]}], ["2", "1"]], 0)
    assert g[1][0] == K(2)
    with pytest.raises(ConfigError):
        parse_gain_matrix([[1.5, "1"], ["1", "1"]], 0)
    r1 = parse_gain_matrix("random-uniform[0.5,2]", 9, 3)
    assert r1 == parse_gain_matrix("random-uniform[0.5,2]", 9, 3)
    assert all(0.5 <= v < 2 for row in r1 for v in row)


def test_farey_and_irrationals():
    assert farey(4) == [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(3, 4)]
    assert len(farey(8)) == 21
    x = quadratic_irrational(5)
    assert float(x) == pytest.approx(5**0.5 - 2, rel=1e-15)


def test_gain_scan_small():
    out = gain_scan(4, irrationals=(2,))
    hs = [(r["h_num"], r["h_den_or_tag"]) for r in out.rows]
    assert hs == [(1, 4), (1, 3), ("sqrt2-1", "irrational"), (1, 2), (2, 3), (3, 4)]
    by = {h: r for h, r in zip(hs, out.rows)}
    assert by[(1, 2)]["degenerate"] and by[(1, 2)]["theory_dof"] == 0.0
    assert by[("sqrt2-1", "irrational")]["theory_dof"] == 1.5


def test_gain_scan_farey4_theory():
    rows = {(r["h_num"], r["h_den_or_tag"]): r["theory_dof"] for r in gain_scan(4).rows}
    assert rows[(1, 2)] == 0.0
    assert round(rows[(2, 3)], 4) == round(rows[(1, 3)], 4) == 1.1606
    assert round(rows[(1, 4)], 4) == 1.0686
    assert rows[(3, 4)] == pytest.approx(1.2170, abs=1e-4)
    assert rows[(3, 4)] == 3 * math.log(3) / math.log(15)


def test_gamma_check_small():
    out = gamma_check(4, 2)
    assert out.rows and all(r["verdict"] == "holds" for r in out.rows)
    assert any("1/2" in w for w in out.warnings)


@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.integers(0, 10**9), st.booleans(),
                          st.text(alphabet="abc,;=\" ", max_size=8)), max_size=10))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(rows):
    cols = ("pe", "trials", "degenerate", "h_spec")
    recs = [dict(zip(cols, r)) for r in rows]
    back = rio.parse_csv(rio.emit_csv(cols, recs))
    for a, b in zip(recs, back):
        assert b["pe"] == a["pe"] and b["trials"] == a["trials"] and b["degenerate"] == a["degenerate"]
        assert b["h_spec"] == (a["h_spec"] or None)
    assert len(back) == len(recs)


def test_gain_scan_cli_byte_identical(tmp_path):
    p = write_cfg(tmp_path, scenario="gain-scan", farey_order=5)
    outs = []
    for k in range(2):
        o = tmp_path / f"run{k}"
        assert main(["gain-scan", "--config", str(p), "--out", str(o)]) == EXIT_OK
        outs.append(o)
    a, b = ((o / "gain_scan.csv").read_bytes() for o in outs)
    assert a == b
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["files"]["gain_scan.csv"] == rio.sha256_file(outs[0] / "gain_scan.csv")
    assert man["seed"] == 0 and man["status"] == "ok" and len(man["config_digest"]) == 64


def test_sweep_cli_and_rerun(tmp_path):
    gains = [["1", {"field": [2, 3], "coords": [0, 1, 0, 0]}], [{"field": [2, 3], "coords": [0, 0, 1, 0]}, "1"]]
    p = write_cfg(tmp_path, scenario="x-channel", gains=gains, epsilon=0.1, P=[1e4, 1e5, 1e6], trials=3000, seed=4)
    csvs = []
    for k, w in enumerate((1, 4)):
        o = tmp_path / f"s{k}"
        code = main(["sweep", "--config", str(p), "--out", str(o), "--workers", str(w)])
        assert code in (EXIT_OK, EXIT_RUNTIME)
        csvs.append((o / "sweep.csv").read_bytes())
    assert csvs[0] == csvs[1]
    rows = rio.parse_csv(csvs[0].decode())
    assert [tuple(rows[0])] == [rio.SWEEP_COLUMNS]
    assert len(rows) == 12 and {r["stream_id"] for r in rows} == {"u1", "u2", "v1", "v2"}


def test_sweep_needs_three_powers(tmp_path):
    p = write_cfg(tmp_path, scenario="x-channel", gains=[["1", "2"], ["3", "5"]], P=[1e4, 1e6])
    assert main(["sweep", "--config", str(p)]) == EXIT_RUNTIME
    assert (tmp_path / "out" / "error.json").exists()


def test_precision_flag(tmp_path):
    try:
        assert main(["khintchine", "--out", str(tmp_path / "k"), "--precision", "256"]) == EXIT_OK
        assert default_precision() == 256
    finally:
        set_default_precision(None)


def test_dmin_command(tmp_path):
    p = write_cfg(tmp_path, scenario="symmetric-rational", h="2/3", epsilon=0.05, P=[1e3, 1e5, 1e7])
    assert main(["dmin", "--config", str(p)]) == EXIT_OK
    rows = rio.parse_csv((tmp_path / "out" / "dmin.csv").read_text())
    assert rows and all(r["passed"] for r in rows)
    assert all(r["verdict"] == "holds" for r in rows)
