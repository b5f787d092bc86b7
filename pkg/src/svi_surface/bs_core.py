"""Black-Scholes in total-variance form.

Every price here is undiscounted and divided by the forward, so a call is a
function of log-moneyness ``k = ln(K/F)`` and total variance ``w = sigma**2 t``
only. Rates and dividends enter exclusively through the forward, which is the
caller's business.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .errors import PricingError

SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Initial upper end of the inversion bracket (expanded by doubling).
W_BRACKET_HI = 6.0
W_BRACKET_LO = 1e-12


def norm_cdf(x):
    """Standard normal cdf (erfc-based, accurate in both tails)."""
    out = ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def d_plus_minus(k, w):
    """Return ``(d+, d-)`` with ``d± = -k/sqrt(w) ± sqrt(w)/2``."""
    k = np.asarray(k, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise PricingError("nonpositive-variance", "d± needs w > 0")
    sw = np.sqrt(w)
    dp = -k / sw + 0.5 * sw
    dm = dp - sw
    if dp.ndim == 0:
        return float(dp), float(dm)
    return dp, dm


def _otm_price(k, w):
    # OTM call for k > 0, OTM put for k <= 0; w > 0 assumed.
    sw = np.sqrt(w)
    dp = -k / sw + 0.5 * sw
    dm = dp - sw
    ek = np.exp(k)
    call = ndtr(dp) - ek * ndtr(dm)
    put = ek * ndtr(-dm) - ndtr(-dp)
    return np.where(k > 0.0, call, put)


def bs_call(k, w):
    """Forward-normalised undiscounted call price ``N(d+) - e^k N(d-)``.

    ``w = 0`` gives intrinsic value ``(1 - e^k)^+``. In-the-money prices are
    assembled as intrinsic plus the out-of-the-money put so that the time
    value keeps full relative precision.
    """
    k_arr = np.asarray(k, dtype=float)
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0.0):
        raise PricingError("negative-variance", "bs_call needs w >= 0")
    k_b, w_b = np.broadcast_arrays(k_arr, w_arr)
    intrinsic = np.maximum(-np.expm1(k_b), 0.0)
    pos = w_b > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        otm = _otm_price(k_b, np.where(pos, w_b, 1.0))
    price = np.where(pos, np.where(k_b > 0.0, otm, intrinsic + otm), intrinsic)
    return float(price) if price.ndim == 0 else price


def bs_vega_w(k, w):
    """Derivative of :func:`bs_call` with respect to total variance."""
    dp, _ = d_plus_minus(k, w)
    return norm_pdf(dp) / (2.0 * np.sqrt(w))


def implied_total_variance(k: float, price: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Invert :func:`bs_call` for total variance.

    Safeguarded Newton on ``w`` inside a bisection bracket. The bracket starts
    at ``[1e-12, 6]`` and its upper end doubles until the price is enclosed,
    so convergence never depends on the Newton steps behaving.

    Raises
    ------
    PricingError
        ``"no-time-value"`` if ``price`` is at or below intrinsic,
        ``"price-exceeds-forward"`` if ``price >= 1``.
    """
    k = float(k)
    price = float(price)
    if not math.isfinite(price) or price >= 1.0:
        raise PricingError("price-exceeds-forward", f"price={price!r} at k={k!r}")
    intrinsic = max(-math.expm1(k), 0.0)
    if k > 0.0:
        target = price
    else:
        target = price - intrinsic
    if target <= 0.0:
        raise PricingError("no-time-value", f"price={price!r} <= intrinsic={intrinsic!r} at k={k!r}")

    def f(w: float) -> float:
        return float(_otm_price(k, w)) - target

    lo, hi = W_BRACKET_LO, W_BRACKET_HI
    if f(lo) >= 0.0:
        return lo
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise PricingError("price-exceeds-forward", f"cannot bracket price={price!r}")

    w = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fw = f(w)
        if abs(fw) <= tol * target:
            return w
        if fw > 0.0:
            hi = w
        else:
            lo = w
        vega = float(bs_vega_w(k, w))
        step_ok = False
        if vega > 0.0:
            w_new = w - fw / vega
            step_ok = lo < w_new < hi
        w_next = w_new if step_ok else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            return w_next
        w = w_next
    return w


def density_at(k, smile):
    """Risk-neutral density of ``ln(S_T/F)`` implied by a smile.

    ``p(k) = g(k) / sqrt(2 pi w) * exp(-d_-^2 / 2)``; equivalently ``K`` times
    the second strike derivative of the call price at ``K = e^k``.
    ``smile`` is any slice accepted by :func:`svi_surface.arbitrage.g_function`.
    """
    from .arbitrage import g_function
    from .smile_params import smile_derivs

    w, _, _ = smile_derivs(smile, k)
    g = g_function(k, smile)
    _, dm = d_plus_minus(k, w)
    out = g / np.sqrt(2.0 * np.pi * np.asarray(w)) * np.exp(-0.5 * np.asarray(dm) ** 2)
    return float(out) if np.ndim(out) == 0 else out
