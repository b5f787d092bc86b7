"""Command-line interface: ``svi-surface <command> ...``.

Exit codes: 0 success, 1 bad input or runtime error, 2 arbitrage found by
``check-arb``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .arbitrage import check_butterfly, check_surface, g_function
from .calibration import FitConfig, fit_surface, raw_repair
from .errors import SviError
from .fileio import ParamsDocument, load_params, load_quotes, save_params
from .surface_ops import CalibratedSurface, LongEndFit, density, query, refit_long_end

log = logging.getLogger("svi_surface")

EXIT_OK, EXIT_ERROR, EXIT_ARBITRAGE = 0, 1, 2


def _fmt(x: float) -> str:
    return repr(float(x))


def surface_from_document(doc: ParamsDocument, validate: bool = True) -> CalibratedSurface:
    le = None
    if doc.long_end:
        le = LongEndFit(**{k: float(v) for k, v in doc.long_end.items()})
    return CalibratedSurface(
        tuple(doc.times),
        tuple(doc.raws),
        long_end=le,
        forwards=tuple(r.forward for r in doc.slices),
        validate=validate,
    )


# --------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    quotes = load_quotes(args.quotes)
    cfg = FitConfig(
        penalty_weight=args.penalty,
        objective="price_sse" if args.objective == "price" else "vol_sse",
        seed=args.seed,
        order=args.order,
    )
    results = fit_surface(quotes, cfg)
    long_end = refit_long_end(results[-1].params)
    meta = {"penalty": cfg.penalty_weight, "objective": cfg.objective, "seed": cfg.seed, "order": cfg.order}
    doc = ParamsDocument.from_fit(results, quotes, long_end=long_end, meta=meta)
    save_params(args.output, doc)
    for r in results:
        print(
            f"slice={_fmt(r.t)} rmse={_fmt(r.rmse)} rmse_w={_fmt(r.rmse_w)} crossedness_prev={_fmt(r.crossedness_prev)} "
            f"crossedness_next={_fmt(r.crossedness_next)} min_g={_fmt(r.butterfly.min_g)} status={r.status}"
        )
    return EXIT_OK


def cmd_check_arb(args) -> int:
    doc = load_params(args.params)
    report = check_surface(doc.raws)
    times = doc.times
    lines = []
    for t, rep in zip(times, report.butterfly):
        if not rep.is_free:
            lines.append(f"slice={_fmt(t)} kind=butterfly value={_fmt(rep.min_g)}")
    for f in report.calendar:
        lines.append(f"slice={_fmt(times[f.j])} kind=calendar value={_fmt(f.value)}")
    for line in lines:
        print(line)
    if lines:
        return EXIT_ARBITRAGE
    print("arbitrage-free", file=sys.stderr)
    return EXIT_OK


def cmd_repair(args) -> int:
    doc = load_params(args.params)
    i = doc.find(args.slice)
    rec = doc.slices[i]
    cfg = FitConfig(seed=args.seed)
    quotes = rec.quote_slice() if args.mode == "optimal" else None
    raw = raw_repair(rec.raw, rec.t, mode=args.mode, quotes=quotes, cfg=cfg)
    doc.slices[i] = rec.with_raw(raw)
    doc.refresh_diagnostics()
    if i == len(doc.slices) - 1 and doc.long_end is not None:
        le = refit_long_end(raw)
        doc.long_end = {"theta": le.theta, "rho": le.rho, "phi": le.phi, "gap": le.gap}
    save_params(args.output or args.params, doc)
    print(f"slice={_fmt(rec.t)} min_g={_fmt(doc.slices[i].min_g)}")
    return EXIT_OK


def cmd_query(args) -> int:
    surf = surface_from_document(load_params(args.params))
    pt = query(args.k, args.t, surf)
    fwd = surf.forward(args.t)
    fields = [
        f"k={_fmt(args.k)}",
        f"t={_fmt(args.t)}",
        f"w={_fmt(pt.total_variance)}",
        f"vol={_fmt(pt.vol)}",
        f"price={_fmt(pt.price)}",
        f"density={_fmt(pt.density)}",
    ]
    if fwd is not None:
        fields.append(f"forward={_fmt(fwd)}")
        fields.append(f"strike={_fmt(fwd * math.exp(args.k))}")
    print(" ".join(fields))
    return EXIT_OK


def _write_csv(path: Path, header, columns) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(x) for x in row])


def cmd_density(args) -> int:
    surf = surface_from_document(load_params(args.params))
    k = np.linspace(args.kmin, args.kmax, args.n)
    p = np.asarray(density(k, args.t, surf))
    _write_csv(Path(args.output), ("k", "density"), (k, p))
    return EXIT_OK


def cmd_report(args) -> int:
    doc = load_params(args.params)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for rec in doc.slices:
        tag = f"{rec.t:.6g}"
        q = rec.quote_slice()
        if q is not None:
            k = q.k
            _write_csv(out / f"smile_t{tag}.csv", ("k", "w_fit", "w_bid", "w_ask"), (k, np.asarray(rec.raw(k)), q.bid_vol**2 * q.t, q.ask_vol**2 * q.t))
        else:
            k = np.linspace(-1.5, 1.5, 61)
            _write_csv(out / f"smile_t{tag}.csv", ("k", "w_fit"), (k, np.asarray(rec.raw(k))))
        kg = np.linspace(-3.0, 3.0, 601)
        _write_csv(out / f"g_t{tag}.csv", ("k", "g"), (kg, np.asarray(g_function(kg, rec.raw))))
        rep = check_butterfly(rec.raw)
        print(f"slice={_fmt(rec.t)} min_g={_fmt(rep.min_g)} butterfly_free={rep.is_free}")
    return EXIT_OK


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for arbitrage findings
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svi-surface", description="Arbitrage-free SVI volatility surfaces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="calibrate a surface to a quote CSV")
    f.add_argument("quotes")
    f.add_argument("-o", "--output", required=True)
    f.add_argument("--penalty", type=float, default=1e6)
    f.add_argument("--objective", choices=("price", "vol"), default="price")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--order", choices=("fwd", "rev"), default="fwd")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("check-arb", help="report static arbitrage in a parameter file")
    c.add_argument("params")
    c.set_defaults(func=cmd_check_arb)

    r = sub.add_parser("repair", help="remove butterfly arbitrage from one slice")
    r.add_argument("params")
    r.add_argument("--slice", type=float, required=True)
    r.add_argument("--mode", choices=("guaranteed", "optimal"), default="guaranteed")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_repair)

    q = sub.add_parser("query", help="evaluate the surface at one point")
    q.add_argument("params")
    q.add_argument("-k", type=float, required=True)
    q.add_argument("-t", type=float, required=True)
    q.set_defaults(func=cmd_query)

    d = sub.add_parser("density", help="write the risk-neutral density at one expiry")
    d.add_argument("params")
    d.add_argument("-t", type=float, required=True)
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--kmin", type=float, default=-3.0)
    d.add_argument("--kmax", type=float, default=3.0)
    d.add_argument("--n", type=int, default=601)
    d.set_defaults(func=cmd_density)

    rp = sub.add_parser("report", help="write fit and g-function CSVs per slice")
    rp.add_argument("params")
    rp.add_argument("-o", "--output", required=True)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SviError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
