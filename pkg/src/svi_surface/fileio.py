"""Quote CSV ingestion and the versioned parameter document.

Quote files are comma-separated with the header
``expiry_years,forward,strike,bid_vol,ask_vol``. Parameter documents are
JSON; floats are written with ``repr`` so that loading gives back the exact
same doubles.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .arbitrage import calendar_violation, check_butterfly
from .calibration import FitResult, QuoteSlice
from .errors import DocumentError, InvalidParameters
from .smile_params import (
    JumpWingsParams,
    NaturalSviParams,
    RawSviParams,
    raw_to_jw,
    raw_to_natural,
)

QUOTE_COLUMNS = ("expiry_years", "forward", "strike", "bid_vol", "ask_vol")
SCHEMA_VERSION = 1
CONSISTENCY_TOL = 1e-9


# --------------------------------------------------------------------------
# quotes


def load_quotes(path: str | Path) -> list[QuoteSlice]:
    """Read a quote CSV into slices sorted by expiry (points sorted by ``k``)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DocumentError("no-quotes", f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != QUOTE_COLUMNS:
            raise DocumentError("bad-header", f"{path}:1: expected {','.join(QUOTE_COLUMNS)}")
        groups: dict[float, dict[str, Any]] = {}
        seen: set[tuple[float, float]] = set()
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(QUOTE_COLUMNS):
                raise DocumentError("malformed-row", f"{path}:{line}: expected {len(QUOTE_COLUMNS)} fields, got {len(row)}")
            try:
                t, fwd, strike, bid, ask = (float(c) for c in row)
            except ValueError as exc:
                raise DocumentError("malformed-row", f"{path}:{line}: {exc}") from None
            if not all(math.isfinite(v) and v > 0.0 for v in (t, fwd, strike, bid, ask)):
                raise DocumentError("malformed-row", f"{path}:{line}: all fields must be positive")
            if bid > ask:
                raise DocumentError("malformed-row", f"{path}:{line}: bid_vol {bid} > ask_vol {ask}")
            if (t, strike) in seen:
                raise DocumentError("duplicate-quote", f"{path}:{line}: duplicate expiry/strike ({t}, {strike})")
            seen.add((t, strike))
            g = groups.setdefault(t, {"forward": fwd, "k": [], "bid": [], "ask": [], "line": line})
            if g["forward"] != fwd:
                raise DocumentError("malformed-row", f"{path}:{line}: forward {fwd} differs from {g['forward']} for expiry {t}")
            g["k"].append(math.log(strike / fwd))
            g["bid"].append(bid)
            g["ask"].append(ask)
    if not groups:
        raise DocumentError("no-quotes", f"{path}: no quote rows")
    out = []
    for t in sorted(groups):
        g = groups[t]
        try:
            out.append(QuoteSlice(t, g["forward"], np.array(g["k"]), np.array(g["bid"]), np.array(g["ask"])))
        except InvalidParameters as exc:
            raise DocumentError(exc.code, f"{path}: expiry {t}: {exc}") from None
    return out


def write_quotes(path: str | Path, slices: Sequence[QuoteSlice]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(QUOTE_COLUMNS)
        for q in slices:
            for k, b, a in zip(q.k, q.bid_vol, q.ask_vol):
                w.writerow([repr(float(q.t)), repr(float(q.forward)), repr(float(q.forward * math.exp(k))), repr(float(b)), repr(float(a))])


# --------------------------------------------------------------------------
# parameter document


@dataclass
class SliceRecord:
    t: float
    raw: RawSviParams
    forward: float = 1.0
    natural: NaturalSviParams | None = None
    jw: JumpWingsParams | None = None
    rmse: float | None = None
    rmse_w: float | None = None
    crossedness_prev: float | None = None
    crossedness_next: float | None = None
    min_g: float | None = None
    quotes: dict[str, list[float]] | None = None  # k, bid_vol, ask_vol

    def __post_init__(self) -> None:
        if self.natural is None:
            self.natural = raw_to_natural(self.raw)
        if self.jw is None:
            self.jw = raw_to_jw(self.raw, self.t)

    def quote_slice(self) -> QuoteSlice | None:
        if not self.quotes:
            return None
        return QuoteSlice(self.t, self.forward, np.array(self.quotes["k"]), np.array(self.quotes["bid_vol"]), np.array(self.quotes["ask_vol"]))

    def with_raw(self, raw: RawSviParams) -> "SliceRecord":
        """Copy with new parameters; fit diagnostics other than ``min_g`` are dropped."""
        return SliceRecord(t=self.t, raw=raw, forward=self.forward, min_g=check_butterfly(raw).min_g, quotes=self.quotes)


@dataclass
class ParamsDocument:
    slices: list[SliceRecord]
    long_end: dict[str, float] | None = None
    theta: list[tuple[float, float]] | None = None
    meta: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        self.slices = sorted(self.slices, key=lambda r: r.t)
        if self.theta is None:
            self.theta = [(r.t, float(r.raw(0.0))) for r in self.slices]

    @property
    def times(self) -> list[float]:
        return [r.t for r in self.slices]

    @property
    def raws(self) -> list[RawSviParams]:
        return [r.raw for r in self.slices]

    def refresh_diagnostics(self) -> None:
        """Recompute crossedness against neighbours, ``min_g`` and the theta samples."""
        raws = self.raws
        for i, rec in enumerate(self.slices):
            rec.crossedness_prev = calendar_violation(raws[i - 1], rec.raw)[0] if i > 0 else 0.0
            rec.crossedness_next = calendar_violation(rec.raw, raws[i + 1])[0] if i < len(raws) - 1 else 0.0
            rec.min_g = check_butterfly(rec.raw).min_g
        self.theta = [(r.t, float(r.raw(0.0))) for r in self.slices]

    def find(self, t: float) -> int:
        for i, r in enumerate(self.slices):
            if abs(r.t - t) <= 1e-12 * max(1.0, abs(t)):
                return i
        raise DocumentError("no-such-slice", f"no slice with t={t}; have {self.times}")

    @classmethod
    def from_fit(cls, results: Sequence[FitResult], quotes: Sequence[QuoteSlice], long_end=None, meta=None) -> "ParamsDocument":
        recs = []
        for r, q in zip(results, quotes):
            recs.append(
                SliceRecord(
                    t=r.t,
                    raw=r.params,
                    forward=q.forward,
                    rmse=r.rmse,
                    rmse_w=r.rmse_w,
                    crossedness_prev=r.crossedness_prev,
                    crossedness_next=r.crossedness_next,
                    min_g=r.butterfly.min_g,
                    quotes={"k": q.k.tolist(), "bid_vol": q.bid_vol.tolist(), "ask_vol": q.ask_vol.tolist()},
                )
            )
        le = None
        if long_end is not None:
            le = {"theta": long_end.theta, "rho": long_end.rho, "phi": long_end.phi, "gap": long_end.gap}
        return cls(slices=recs, long_end=le, meta=dict(meta or {}))


def _close(x: float, y: float) -> bool:
    return abs(x - y) <= CONSISTENCY_TOL * max(1.0, abs(x), abs(y))


def check_consistency(rec: SliceRecord) -> None:
    """Raise unless the stored natural and JW parameters match the raw ones."""
    nat = raw_to_natural(rec.raw)
    jw = raw_to_jw(rec.raw, rec.t)
    pairs = [
        ("natural", (rec.natural.delta, rec.natural.mu, rec.natural.rho, rec.natural.omega, rec.natural.zeta), (nat.delta, nat.mu, nat.rho, nat.omega, nat.zeta)),
        ("jw", (rec.jw.t, rec.jw.v, rec.jw.psi, rec.jw.p, rec.jw.c, rec.jw.v_tilde), (jw.t, jw.v, jw.psi, jw.p, jw.c, jw.v_tilde)),
    ]
    for name, stored, expected in pairs:
        for s, e in zip(stored, expected):
            if not _close(float(s), float(e)):
                raise DocumentError("inconsistent-parameters", f"slice t={rec.t}: {name} parameters disagree with raw ({s} vs {e})")


def _num(x):
    return None if x is None else float(x)


def _record_to_json(r: SliceRecord) -> dict[str, Any]:
    out: dict[str, Any] = {
        "t": float(r.t),
        "forward": float(r.forward),
        "raw": {k: float(getattr(r.raw, k)) for k in ("a", "b", "rho", "m", "sigma")},
        "natural": {k: float(getattr(r.natural, k)) for k in ("delta", "mu", "rho", "omega", "zeta")},
        "jw": {k: float(getattr(r.jw, k)) for k in ("t", "v", "psi", "p", "c", "v_tilde")},
        "diagnostics": {
            "rmse": _num(r.rmse),
            "rmse_w": _num(r.rmse_w),
            "crossedness_prev": _num(r.crossedness_prev),
            "crossedness_next": _num(r.crossedness_next),
            "min_g": _num(r.min_g),
        },
    }
    if r.quotes:
        out["quotes"] = {k: [float(v) for v in vals] for k, vals in r.quotes.items()}
    return out


def save_params(path: str | Path, doc: ParamsDocument) -> None:
    for rec in doc.slices:
        check_consistency(rec)
    payload = {
        "schema_version": doc.schema_version,
        "slices": [_record_to_json(r) for r in doc.slices],
        "long_end": None if doc.long_end is None else {k: float(v) for k, v in doc.long_end.items()},
        "theta": [[float(t), float(th)] for t, th in doc.theta],
        "meta": doc.meta,
    }
    Path(path).write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _record_from_json(d: dict[str, Any]) -> SliceRecord:
    raw = RawSviParams(**d["raw"])
    nat = NaturalSviParams(**d["natural"]) if "natural" in d else None
    jw = JumpWingsParams(**d["jw"]) if "jw" in d else None
    diag = d.get("diagnostics") or {}
    rec = SliceRecord(
        t=float(d["t"]),
        raw=raw,
        forward=float(d.get("forward", 1.0)),
        natural=nat,
        jw=jw,
        rmse=diag.get("rmse"),
        rmse_w=diag.get("rmse_w"),
        crossedness_prev=diag.get("crossedness_prev"),
        crossedness_next=diag.get("crossedness_next"),
        min_g=diag.get("min_g"),
        quotes=d.get("quotes"),
    )
    check_consistency(rec)
    return rec


def load_params(path: str | Path) -> ParamsDocument:
    """Read a parameter document.

    Only ``t`` and ``raw`` are required per slice; missing natural/JW blocks
    are derived, present ones must agree with ``raw`` to 1e-9.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError("parse-error", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise DocumentError("parse-error", f"{path}: top level must be an object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DocumentError("unsupported-schema", f"{path}: schema_version={version!r}, expected {SCHEMA_VERSION}")
    try:
        slices = [_record_from_json(d) for d in payload["slices"]]
        theta = [tuple(x) for x in payload["theta"]] if payload.get("theta") else None
    except (KeyError, TypeError) as exc:
        raise DocumentError("parse-error", f"{path}: missing or malformed field {exc}") from None
    except InvalidParameters as exc:
        raise DocumentError(exc.code, f"{path}: {exc}") from None
    return ParamsDocument(
        slices=slices,
        long_end=payload.get("long_end"),
        theta=theta,
        meta=payload.get("meta") or {},
        schema_version=version,
    )
