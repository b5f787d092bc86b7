import csv
import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import trapezoid

from svi_surface import load_params, synthetic_quotes, write_quotes
from svi_surface.cli import main

LINE = re.compile(r"^slice=(\S+) kind=(butterfly|calendar) value=(\S+)$")
VOGT_DOC = {
    "schema_version": 1,
    "slices": [{"t": 1.0, "raw": {"a": -0.0410, "b": 0.1331, "rho": 0.3060, "m": 0.3586, "sigma": 0.4153}}],
}


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, truth):
    d = tmp_path_factory.mktemp("cli")
    q = d / "quotes.csv"
    write_quotes(q, synthetic_quotes(truth, (0.25, 1.0, 2.0), forward=100.0))
    out = d / "params.json"
    assert main(["fit", str(q), "-o", str(out), "--seed", "7"]) == 0
    return d, q, out


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_fit_writes_clean_document(fitted):
    _, _, out = fitted
    doc = load_params(out)
    assert len(doc.slices) == 3
    for r in doc.slices:
        assert r.crossedness_prev == 0.0 and r.crossedness_next == 0.0
        assert r.min_g > 0 and r.rmse_w < 1e-6
    assert doc.long_end is not None
    assert doc.meta["seed"] == 7


def test_fit_is_deterministic(fitted, tmp_path):
    _, q, out = fitted
    again = tmp_path / "again.json"
    assert main(["fit", str(q), "-o", str(again), "--seed", "7"]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_check_arb_clean(fitted, capsys):
    assert main(["check-arb", str(fitted[2])]) == 0
    assert capsys.readouterr().out == ""


def test_check_arb_vogt(tmp_path, capsys):
    p = tmp_path / "vogt.json"
    p.write_text(json.dumps(VOGT_DOC))
    assert main(["check-arb", str(p)]) == 2
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    m = LINE.match(lines[0])
    assert m and m.group(2) == "butterfly" and float(m.group(3)) < 0 and float(m.group(1)) == 1.0


def test_check_arb_calendar(tmp_path, capsys):
    doc = {
        "schema_version": 1,
        "slices": [
            {"t": 0.5, "raw": {"a": 0.0, "b": 0.4, "rho": 0.0, "m": 0.0, "sigma": 0.05}},
            {"t": 1.0, "raw": {"a": 0.03, "b": 0.1, "rho": 0.0, "m": 0.0, "sigma": 0.2}},
        ],
    }
    p = tmp_path / "cal.json"
    p.write_text(json.dumps(doc))
    assert main(["check-arb", str(p)]) == 2
    lines = capsys.readouterr().out.strip().splitlines()
    kinds = [LINE.match(x).group(2) for x in lines]
    assert "calendar" in kinds


@pytest.mark.parametrize("mode", ["guaranteed", "optimal"])
def test_repair_then_clean(tmp_path, mode, capsys):
    p = tmp_path / "vogt.json"
    p.write_text(json.dumps(VOGT_DOC))
    out = tmp_path / "fixed.json"
    assert main(["repair", str(p), "--slice", "1", "--mode", mode, "-o", str(out)]) == 0
    assert main(["check-arb", str(out)]) == 0
    # input untouched when -o is given
    assert main(["check-arb", str(p)]) == 2


def test_repair_unknown_slice(tmp_path):
    p = tmp_path / "vogt.json"
    p.write_text(json.dumps(VOGT_DOC))
    assert main(["repair", str(p), "--slice", "2"]) == 1


def test_query_atm_vol(fitted, capsys):
    doc = load_params(fitted[2])
    for r in doc.slices:
        assert main(["query", str(fitted[2]), "-k", "0", "-t", repr(r.t)]) == 0
        fields = dict(x.split("=") for x in capsys.readouterr().out.split())
        assert abs(float(fields["vol"]) - math.sqrt(float(r.raw(0.0)) / r.t)) < 1e-10
        assert float(fields["forward"]) == pytest.approx(100.0)


def test_density_csv(fitted, tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", str(fitted[2]), "-t", "0.6", "-o", str(out), "--kmin", "-4", "--kmax", "4", "--n", "1601"]) == 0
    header, data = _read_csv(out)
    assert header == ["k", "density"]
    assert abs(trapezoid(data[:, 1], data[:, 0]) - 1) < 1e-4


def test_report(fitted, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", str(fitted[2]), "-o", str(out)]) == 0
    smiles = sorted(out.glob("smile_t*.csv"))
    gs = sorted(out.glob("g_t*.csv"))
    assert len(smiles) == 3 and len(gs) == 3
    for f in smiles:
        header, data = _read_csv(f)
        assert header == ["k", "w_fit", "w_bid", "w_ask"]
        assert np.all(data[:, 2] <= data[:, 3])
    for f in gs:
        header, data = _read_csv(f)
        assert header == ["k", "g"]
        assert np.min(data[:, 1]) >= -1e-12


def test_io_errors_exit_1(tmp_path):
    assert main(["check-arb", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("expiry_years,forward,strike,bid_vol,ask_vol\n1,100,100,0.3,0.2\n")
    assert main(["fit", str(bad), "-o", str(tmp_path / "x.json")]) == 1
    trunc = tmp_path / "t.json"
    trunc.write_text('{"schema_version": 1, "slices": [')
    assert main(["query", str(trunc), "-k", "0", "-t", "1"]) == 1


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as e:
        main(["query"])
    assert e.value.code == 1


def test_module_entry_point(tmp_path):
    p = tmp_path / "vogt.json"
    p.write_text(json.dumps(VOGT_DOC))
    r = subprocess.run([sys.executable, "-m", "svi_surface", "check-arb", str(p)], capture_output=True, text=True)
    assert r.returncode == 2
    assert "kind=butterfly" in r.stdout
