import json

import numpy as np
import pytest

from svi_surface import (
    DocumentError,
    ParamsDocument,
    QuoteSlice,
    RawSviParams,
    SliceRecord,
    load_params,
    load_quotes,
    save_params,
    write_quotes,
)

HEADER = "expiry_years,forward,strike,bid_vol,ask_vol\n"


def _write(tmp_path, text, name="q.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_expiries(tmp_path):
    rows = []
    for t, f in ((0.5, 100.0), (1.0, 101.0)):
        for K in np.linspace(80, 120, 9)[::-1]:
            rows.append(f"{t},{f},{K},0.2,0.21")
    slices = load_quotes(_write(tmp_path, HEADER + "\n".join(rows) + "\n"))
    assert [s.t for s in slices] == [0.5, 1.0]
    assert all(len(s.k) == 9 for s in slices)
    assert all(np.all(np.diff(s.k) > 0) for s in slices)
    assert slices[1].k[0] == pytest.approx(np.log(80 / 101.0))


@pytest.mark.parametrize(
    "body,code,line",
    [
        ("1,100,100,0.22,0.21\n", "malformed-row", 2),
        ("1,100,100,0.2,0.21\n1,100,abc,0.2,0.21\n", "malformed-row", 3),
        ("1,100,100,0.2\n", "malformed-row", 2),
        ("1,100,100,-0.2,0.21\n", "malformed-row", 2),
        ("1,100,100,0.2,0.21\n1,100,100,0.2,0.21\n", "duplicate-quote", 3),
    ],
)
def test_bad_rows_report_line(tmp_path, body, code, line):
    p = _write(tmp_path, HEADER + body)
    with pytest.raises(DocumentError) as e:
        load_quotes(p)
    assert e.value.code == code
    assert f":{line}:" in str(e.value)


def test_empty_and_header_only(tmp_path):
    for text in ("", HEADER):
        with pytest.raises(DocumentError) as e:
            load_quotes(_write(tmp_path, text))
        assert e.value.code == "no-quotes"
    with pytest.raises(DocumentError) as e:
        load_quotes(_write(tmp_path, "a,b,c\n1,2,3\n"))
    assert e.value.code == "bad-header"


def test_quotes_roundtrip(tmp_path, synth_quotes):
    p = tmp_path / "q.csv"
    write_quotes(p, synth_quotes)
    back = load_quotes(p)
    for a, b in zip(synth_quotes, back):
        assert a.t == b.t
        assert np.allclose(a.k, b.k, atol=1e-15)
        assert np.array_equal(a.bid_vol, b.bid_vol)


def _doc(n=5):
    recs = []
    for i in range(n):
        t = 0.25 * (i + 1)
        raw = RawSviParams(0.01 + 0.01 * i, 0.1 + 0.01 * i, -0.3 + 0.05 * i, 0.02 * i, 0.2 + 0.01 * i)
        k = np.linspace(-0.5, 0.5, 7)
        q = QuoteSlice.from_smile(t, k, raw, half_spread=0.001)
        recs.append(
            SliceRecord(
                t=t, raw=raw, forward=100.0 + i / 3, rmse=1e-9 * (i + 1), crossedness_prev=0.0, crossedness_next=0.0,
                min_g=0.1 / 3, quotes={"k": q.k.tolist(), "bid_vol": q.bid_vol.tolist(), "ask_vol": q.ask_vol.tolist()},
            )
        )
    return ParamsDocument(slices=recs, long_end={"theta": 0.1 / 7, "rho": -0.3, "phi": 1.0 / 3, "gap": 0.0}, meta={"seed": 3})


def test_params_roundtrip_exact(tmp_path):
    doc = _doc()
    p = tmp_path / "p.json"
    save_params(p, doc)
    back = load_params(p)
    assert back.long_end == doc.long_end
    assert back.theta == doc.theta
    assert back.meta == doc.meta
    for a, b in zip(doc.slices, back.slices):
        assert a.raw == b.raw and a.natural == b.natural and a.jw == b.jw
        assert (a.t, a.forward, a.rmse, a.min_g) == (b.t, b.forward, b.rmse, b.min_g)
        assert a.quotes == b.quotes


def test_truncated_document(tmp_path):
    p = tmp_path / "p.json"
    save_params(p, _doc())
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(DocumentError) as e:
        load_params(p)
    assert e.value.code == "parse-error"
    assert "p.json:" in str(e.value)


def test_schema_mismatch(tmp_path):
    p = tmp_path / "p.json"
    save_params(p, _doc(1))
    d = json.loads(p.read_text())
    d["schema_version"] = 99
    p.write_text(json.dumps(d))
    with pytest.raises(DocumentError) as e:
        load_params(p)
    assert e.value.code == "unsupported-schema"


def test_inconsistent_parameters_rejected(tmp_path):
    doc = _doc(2)
    rec = doc.slices[0]
    rec.jw = rec.jw.replace(c=rec.jw.c * (1 + 1e-7))
    with pytest.raises(DocumentError) as e:
        save_params(tmp_path / "p.json", doc)
    assert e.value.code == "inconsistent-parameters"
    # and on load
    good = _doc(2)
    p = tmp_path / "good.json"
    save_params(p, good)
    d = json.loads(p.read_text())
    d["slices"][0]["natural"]["omega"] *= 1.001
    p.write_text(json.dumps(d))
    with pytest.raises(DocumentError):
        load_params(p)


def test_minimal_handwritten_document(tmp_path):
    p = tmp_path / "min.json"
    p.write_text(json.dumps({"schema_version": 1, "slices": [{"t": 1.0, "raw": {"a": 0.01, "b": 0.1, "rho": 0.0, "m": 0.0, "sigma": 0.2}}]}))
    doc = load_params(p)
    assert doc.slices[0].jw.t == 1.0
    assert doc.theta == [(1.0, pytest.approx(0.03))]
