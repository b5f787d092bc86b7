"""Calibration of SVI slices to quotes, and butterfly repair in JW coordinates.

The fitting pipeline follows the usual recipe: a square-root SSVI surface
fitted to mid prices gives the starting point, then each slice is refined
on its own with a heavy penalty for crossing its neighbours.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from .arbitrage import ButterflyReport, calendar_violation, check_butterfly, crossedness
from .bs_core import bs_call
from .errors import CalibrationError, InvalidParameters
from .smile_params import JumpWingsParams, RawSviParams, jw_to_raw, raw_to_jw
from .ssvi import PowerLaw, SsviSurface, ThetaCurve

log = logging.getLogger(__name__)

Objective = Literal["price_sse", "vol_sse"]


@dataclass(frozen=True)
class QuoteSlice:
    """Bid/ask implied vols at log-moneyness points for one expiry."""

    t: float
    forward: float
    k: np.ndarray
    bid_vol: np.ndarray
    ask_vol: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.k, dtype=float)
        bid = np.asarray(self.bid_vol, dtype=float)
        ask = np.asarray(self.ask_vol, dtype=float)
        if not self.t > 0.0:
            raise InvalidParameters("invalid-quotes", f"t={self.t} <= 0")
        if not self.forward > 0.0:
            raise InvalidParameters("invalid-quotes", f"forward={self.forward} <= 0")
        if not (k.shape == bid.shape == ask.shape) or k.ndim != 1:
            raise InvalidParameters("invalid-quotes", "k, bid_vol, ask_vol must be 1-d and equal length")
        if k.size < 5:
            raise InvalidParameters("invalid-quotes", f"need >= 5 points, got {k.size}")
        if np.any(bid > ask):
            raise InvalidParameters("invalid-quotes", "bid_vol > ask_vol")
        if np.any(bid <= 0.0):
            raise InvalidParameters("invalid-quotes", "vols must be positive")
        order = np.argsort(k, kind="stable")
        object.__setattr__(self, "k", k[order])
        object.__setattr__(self, "bid_vol", bid[order])
        object.__setattr__(self, "ask_vol", ask[order])

    @classmethod
    def from_smile(cls, t: float, k, smile, forward: float = 1.0, half_spread: float = 0.0) -> "QuoteSlice":
        """Synthetic quotes from a total-variance smile (vols ± ``half_spread``)."""
        k = np.asarray(k, dtype=float)
        vol = np.sqrt(np.asarray(smile(k)) / t)
        return cls(t, forward, k, vol - half_spread, vol + half_spread)

    @property
    def mid_vol(self) -> np.ndarray:
        return 0.5 * (self.bid_vol + self.ask_vol)

    @property
    def mid_w(self) -> np.ndarray:
        return self.mid_vol**2 * self.t

    @property
    def mid_price(self) -> np.ndarray:
        return np.asarray(bs_call(self.k, self.mid_w))

    def atm_total_variance(self) -> float:
        """Mid total variance at ``k = 0`` by linear interpolation in ``k``."""
        hit = np.flatnonzero(self.k == 0.0)
        if hit.size:
            return float(self.mid_w[hit[0]])
        below = np.flatnonzero(self.k < 0.0)
        above = np.flatnonzero(self.k > 0.0)
        if below.size == 0 or above.size == 0:
            raise CalibrationError("cannot-anchor-atm", f"no strikes on both sides of k=0 at t={self.t}")
        i, j = below[-1], above[0]
        k0, k1 = self.k[i], self.k[j]
        w0, w1 = self.mid_w[i], self.mid_w[j]
        return float(w0 + (w1 - w0) * (0.0 - k0) / (k1 - k0))


def synthetic_quotes(
    surface: SsviSurface,
    times: Sequence[float],
    n_strikes: int = 15,
    width: float = 2.0,
    half_spread: float = 0.0,
    forward: float = 1.0,
) -> list[QuoteSlice]:
    """Quotes read off an SSVI surface at ``k = sqrt(theta_t) * linspace(-width, width, n)``."""
    out = []
    for t in times:
        theta = float(surface.theta(t))
        k = math.sqrt(theta) * np.linspace(-width, width, n_strikes)
        out.append(QuoteSlice.from_smile(t, k, surface.slice(t), forward=forward, half_spread=half_spread))
    return out


@dataclass(frozen=True)
class FitConfig:
    penalty_weight: float = 1e6
    max_iters: int = 2000
    restarts: int = 5
    objective: Objective = "price_sse"
    seed: int = 0
    perturbation: float = 0.1
    order: Literal["fwd", "rev"] = "fwd"
    passes: int = 2

    def __post_init__(self) -> None:
        if not self.penalty_weight > 0.0:
            raise ValueError("penalty_weight must be > 0")
        if self.objective not in ("price_sse", "vol_sse"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.order not in ("fwd", "rev"):
            raise ValueError(f"unknown order {self.order!r}")


@dataclass(frozen=True)
class FitResult:
    t: float
    params: RawSviParams
    rmse: float
    crossedness_prev: float
    crossedness_next: float
    butterfly: ButterflyReport
    status: str = "ok"
    objective: float = float("nan")
    rmse_w: float = float("nan")  # total-variance RMSE against mid
    extra: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------
# square-root SSVI starting surface


def fit_sqrt_ssvi(slices: Sequence[QuoteSlice]) -> SsviSurface:
    """Fit ``(rho, eta)`` of a ``gamma = 1/2`` power-law SSVI to mid prices.

    The ATM curve is read off the quotes (interpolated at ``k = 0``) and kept
    fixed; a running maximum keeps it non-decreasing.
    """
    if not slices:
        raise CalibrationError("no-quotes", "need at least one slice")
    slices = sorted(slices, key=lambda q: q.t)
    times = np.array([q.t for q in slices])
    thetas = np.maximum.accumulate(np.array([q.atm_total_variance() for q in slices]))
    curve = ThetaCurve(tuple(times), tuple(thetas))

    ks = [q.k for q in slices]
    mids = np.concatenate([q.mid_price for q in slices])

    def residuals(x):
        rho, eta = x
        sqrt_th = np.sqrt(thetas)
        out = []
        for k, th, st in zip(ks, thetas, sqrt_th):
            phi = eta / st
            z = phi * k
            w = 0.5 * th * (1.0 + rho * z + np.sqrt((z + rho) ** 2 + 1.0 - rho * rho))
            out.append(bs_call(k, w))
        return np.concatenate(out) - mids

    res = least_squares(
        residuals,
        x0=np.array([0.0, 1.0]),
        bounds=([-0.999, 1e-8], [0.999, 50.0]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    rho, eta = (float(v) for v in res.x)
    flat = np.array([0.0, 1e-8])
    if eta <= 1e-6 or np.sum(residuals(flat) ** 2) <= np.sum(res.fun**2):
        rho, eta = 0.0, 1e-8  # no curvature in the data, skew not identified
    return SsviSurface(rho=rho, phi=PowerLaw(eta, 0.5), theta=curve)


# --------------------------------------------------------------------------
# slice fitting


def _to_x(p: RawSviParams) -> np.ndarray:
    vmin = max(p.min_variance(), 1e-10)
    return np.array([math.log(vmin), math.log(max(p.b, 1e-10)), math.atanh(p.rho), p.m, math.log(p.sigma)])


def _from_x(x: np.ndarray) -> RawSviParams:
    vmin = math.exp(min(x[0], 50.0))
    b = math.exp(min(x[1], 50.0))
    rho = math.tanh(x[2])
    if abs(rho) >= 1.0:
        rho = math.copysign(1.0 - 1e-15, rho)
    sigma = math.exp(max(min(x[4], 50.0), -50.0))
    a = vmin - b * sigma * math.sqrt(1.0 - rho * rho)
    return RawSviParams(a=a, b=b, rho=rho, m=float(x[3]), sigma=sigma)


def _calendar_penalty(p: RawSviParams, below: RawSviParams | None, above: RawSviParams | None) -> float:
    total = 0.0
    if below is not None:
        total += calendar_violation(below, p)[0]
    if above is not None:
        total += calendar_violation(p, above)[0]
    return total


def slice_objective(p: RawSviParams, quotes: QuoteSlice, objective: Objective = "price_sse") -> float:
    w = np.asarray(p(quotes.k))
    if objective == "vol_sse":
        return float(np.sum((np.sqrt(np.maximum(w, 0.0) / quotes.t) - quotes.mid_vol) ** 2))
    return float(np.sum((np.asarray(bs_call(quotes.k, np.maximum(w, 0.0))) - quotes.mid_price) ** 2))


def fit_slice(
    quotes: QuoteSlice,
    init: RawSviParams,
    neighbors: tuple[RawSviParams | None, RawSviParams | None] = (None, None),
    cfg: FitConfig | None = None,
) -> FitResult:
    """Least-squares fit of one raw SVI slice with a crossing penalty.

    Minimises ``SSE + penalty_weight * (violation vs below + violation vs
    above)`` with Nelder-Mead in an unconstrained reparameterisation
    (log minimum variance, log b, atanh rho, m, log sigma). After the first
    run, ``cfg.restarts`` runs start from randomly perturbed copies of the
    best point, followed by one unperturbed restart to re-expand the simplex.
    """
    cfg = cfg or FitConfig()
    below, above = neighbors
    rng = np.random.default_rng(cfg.seed)

    def total(x):
        try:
            p = _from_x(x)
        except InvalidParameters:
            return 1e10
        f = slice_objective(p, quotes, cfg.objective)
        if below is not None or above is not None:
            f += cfg.penalty_weight * _calendar_penalty(p, below, above)
        return f

    def run(x0):
        scale = np.array([0.1, 0.1, 0.1, 0.1 * max(math.exp(x0[4]), 0.05), 0.1])
        simplex = np.vstack([x0] + [x0 + np.eye(5)[i] * scale[i] for i in range(5)])
        return minimize(
            total,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": cfg.max_iters,
                "maxfev": 4 * cfg.max_iters,
                "xatol": 1e-12,
                "fatol": 1e-30,
                "adaptive": True,
                "initial_simplex": simplex,
            },
        )

    x_init = _to_x(init)
    f_init = total(x_init)
    best_x, best_f = x_init, f_init
    hit_limit = False

    for i in range(cfg.restarts + 2):
        if i == 0:
            x0 = x_init
        elif i <= cfg.restarts:
            x0 = best_x + cfg.perturbation * rng.standard_normal(5) * np.array([1, 1, 1, max(math.exp(best_x[4]), 0.05), 1])
        else:
            x0 = best_x
        res = run(x0)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
            hit_limit = res.status in (1, 2)

    params = init if best_f >= f_init else _from_x(best_x)
    return _make_result(quotes, params, below, above, cfg, "max-iters" if hit_limit else "ok")


def _make_result(quotes, params, below, above, cfg, status) -> FitResult:
    fit_price = np.asarray(bs_call(quotes.k, np.asarray(params(quotes.k))))
    rmse = float(np.sqrt(np.mean((fit_price - quotes.mid_price) ** 2)))
    c_prev = crossedness(below, params) if below is not None and below != params else 0.0
    c_next = crossedness(params, above) if above is not None and above != params else 0.0
    obj = slice_objective(params, quotes, cfg.objective)
    return FitResult(
        t=quotes.t,
        params=params,
        rmse=rmse,
        crossedness_prev=c_prev,
        crossedness_next=c_next,
        butterfly=check_butterfly(params),
        status=status,
        objective=obj,
        rmse_w=float(np.sqrt(np.mean((np.asarray(params(quotes.k)) - quotes.mid_w) ** 2))),
    )


def initial_guesses(slices: Sequence[QuoteSlice]) -> tuple[SsviSurface, list[RawSviParams]]:
    surf = fit_sqrt_ssvi(slices)
    return surf, [surf.slice_at_theta(th) for th in surf.theta.thetas]


def fit_surface(slices: Sequence[QuoteSlice], cfg: FitConfig | None = None) -> list[FitResult]:
    """Square-root SSVI start, then slice-by-slice refinement.

    Each sweep visits the slices in expiry order (or reverse), fitting each
    against its current neighbours. ``cfg.passes`` sweeps are made so that
    a slice fitted against the rough starting guess of its successor gets a
    second look once that successor has been refined.
    """
    cfg = cfg or FitConfig()
    times = [q.t for q in slices]
    if any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise CalibrationError("unsorted-expiries", "slices must be sorted by strictly increasing t")
    _, current = initial_guesses(slices)
    n = len(slices)
    order = list(range(n)) if cfg.order == "fwd" else list(range(n - 1, -1, -1))
    statuses = ["ok"] * n
    for sweep in range(max(1, cfg.passes)):
        for i in order:
            below = current[i - 1] if i > 0 else None
            above = current[i + 1] if i < n - 1 else None
            sub = FitConfig(**{**cfg.__dict__, "seed": cfg.seed + 1000 * sweep + i})
            res = fit_slice(slices[i], current[i], (below, above), sub)
            current[i] = res.params
            statuses[i] = res.status
        log.debug("sweep %d done", sweep)

    results = []
    for i in range(n):
        below = current[i - 1] if i > 0 else None
        above = current[i + 1] if i < n - 1 else None
        results.append(_make_result(slices[i], current[i], below, above, cfg, statuses[i]))
    return results


# --------------------------------------------------------------------------
# butterfly repair


def repair_butterfly_guaranteed(j: JumpWingsParams) -> JumpWingsParams:
    """Replace the call wing and minimum variance by their SSVI-consistent
    values ``c' = p + 2 psi`` and ``v~' = v 4 p c' / (p + c')^2``."""
    c_new = j.p + 2.0 * j.psi
    if c_new < 0.0:
        raise InvalidParameters("non-convex-jw-parameters", f"p + 2 psi = {c_new} < 0")
    denom = (j.p + c_new) ** 2
    if denom == 0.0:
        raise InvalidParameters("degenerate-flat", "p + c' = 0")
    vt_new = j.v * 4.0 * j.p * c_new / denom
    return j.replace(c=c_new, v_tilde=vt_new)


def _price_distance(raw: RawSviParams, k: np.ndarray, target: np.ndarray) -> float:
    return float(np.sum((np.asarray(bs_call(k, np.asarray(raw(k)))) - target) ** 2))


def repair_butterfly_optimal(
    j: JumpWingsParams,
    quotes: QuoteSlice | np.ndarray | None = None,
    cfg: FitConfig | None = None,
) -> JumpWingsParams:
    """Closest butterfly-free smile varying only the call wing and minimum variance.

    ``(c, v~)`` is searched over the rectangle spanned by the original values
    and those of :func:`repair_butterfly_guaranteed`; ``v, psi, p`` stay fixed.
    The objective is the squared distance between option prices of the
    candidate and the original slice at the quote strikes (``quotes`` may be a
    :class:`QuoteSlice` or an array of log-moneyness; default 61 points on
    ``[-1.5, 1.5]``), plus ``penalty_weight * max(0, -min g)``.
    The result is guaranteed to pass :func:`check_butterfly`; if the optimiser
    lands marginally inside the arbitrage region it is pulled back along the
    segment to the guaranteed point.
    """
    cfg = cfg or FitConfig()
    original = jw_to_raw(j)
    if check_butterfly(original).is_free:
        return j
    guaranteed = repair_butterfly_guaranteed(j)
    if not check_butterfly(jw_to_raw(guaranteed)).is_free:
        raise CalibrationError("repair-failed", "guaranteed repair is not butterfly-free")

    if quotes is None:
        k = np.linspace(-1.5, 1.5, 61)
    elif isinstance(quotes, QuoteSlice):
        k = quotes.k
    else:
        k = np.asarray(quotes, dtype=float)
    target = np.asarray(bs_call(k, np.asarray(original(k))))

    c_lo, c_hi = sorted((guaranteed.c, j.c))
    v_lo, v_hi = sorted((j.v_tilde, guaranteed.v_tilde))

    def unpack(u):
        return j.replace(c=float(c_lo + u[0] * (c_hi - c_lo)), v_tilde=float(v_lo + u[1] * (v_hi - v_lo)))

    def raw_of(u):
        return jw_to_raw(unpack(np.clip(u, 0.0, 1.0)))

    def total(u):
        try:
            raw = raw_of(u)
        except InvalidParameters:
            return 1e6
        rep = check_butterfly(raw, n_grid=401)
        penalty = max(0.0, -rep.min_g) + (0.0 if rep.d_plus_limit_ok else 1.0)
        return _price_distance(raw, k, target) + cfg.penalty_weight * penalty

    u_guar = np.array([0.0 if guaranteed.c == c_lo else 1.0, 0.0 if guaranteed.v_tilde == v_lo else 1.0])
    best_u, best_f = u_guar, total(u_guar)
    rng = np.random.default_rng(cfg.seed)
    starts = [u_guar, np.array([0.5, 0.5])] + [rng.uniform(0.0, 1.0, 2) for _ in range(cfg.restarts)]
    for u0 in starts:
        res = minimize(
            total,
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0), (0.0, 1.0)],
            options={"maxiter": cfg.max_iters, "xatol": 1e-10, "fatol": 1e-18, "adaptive": True},
        )
        if res.fun < best_f:
            best_u, best_f = np.clip(res.x, 0.0, 1.0), float(res.fun)

    # pull back toward the guaranteed point until the full check passes
    def passes(lam):
        u = best_u + lam * (u_guar - best_u)
        try:
            return check_butterfly(raw_of(u)).is_free
        except InvalidParameters:
            return False

    lam = 0.0
    if not passes(0.0):
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if passes(mid):
                hi = mid
            else:
                lo = mid
        lam = hi
    u_final = best_u + lam * (u_guar - best_u)
    result = unpack(np.clip(u_final, 0.0, 1.0))
    if _price_distance(jw_to_raw(result), k, target) > _price_distance(jw_to_raw(guaranteed), k, target):
        return guaranteed
    return result


def raw_repair(raw: RawSviParams, t: float, mode: str = "guaranteed", quotes=None, cfg: FitConfig | None = None) -> RawSviParams:
    """Convenience wrapper: repair a raw slice through JW coordinates."""
    j = raw_to_jw(raw, t)
    if mode == "guaranteed":
        return jw_to_raw(repair_butterfly_guaranteed(j))
    if mode == "optimal":
        return jw_to_raw(repair_butterfly_optimal(j, quotes, cfg))
    raise ValueError(f"unknown repair mode {mode!r}")
