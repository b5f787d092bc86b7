"""A calibrated surface: arbitrage-free interpolation and extrapolation of
a discrete set of SVI slices.

Between two calibrated expiries, normalised call prices at equal
log-moneyness are mixed with weight
``alpha_t = (sqrt(theta_2) - sqrt(theta_t)) / (sqrt(theta_2) - sqrt(theta_1))``;
before the first expiry the intrinsic value plays the role of the earlier
slice. Past the last expiry an SSVI refit of the final slice is shifted up by
``theta_t - theta_n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .arbitrage import calendar_violation, check_butterfly
from .bs_core import bs_call, d_plus_minus, density_at, implied_total_variance
from .errors import SurfaceError
from .smile_params import NaturalSviParams, RawSviParams, natural_to_raw
from .ssvi import MIN_THETA_SLOPE

CHECK_GRID = np.linspace(-5.0, 5.0, 2001)


@dataclass(frozen=True)
class LongEndFit:
    """SSVI smile ``theta/2 (1 + rho phi k + sqrt((phi k + rho)^2 + 1 - rho^2))``
    refitted to the final slice, with ``theta`` pinned to its ATM variance."""

    theta: float
    rho: float
    phi: float
    gap: float = 0.0  # upward shift keeping the refit above the last slice on CHECK_GRID

    @property
    def raw(self) -> RawSviParams:
        return natural_to_raw(NaturalSviParams(0.0, 0.0, self.rho, self.theta, self.phi)).shifted(self.gap)

    def conditions_ok(self) -> bool:
        scale = 1.0 + abs(self.rho)
        return self.theta * self.phi * scale < 4.0 and self.theta * self.phi**2 * scale <= 4.0


def refit_long_end(final: RawSviParams, k=None) -> LongEndFit:
    """Least-squares SSVI fit of ``final`` in total variance on ``k``.

    ``rho`` and ``phi`` are bounded so that the butterfly conditions
    ``theta phi (1+|rho|) < 4`` and ``theta phi^2 (1+|rho|) <= 4`` hold.
    """
    theta = float(final(0.0))
    if k is None:
        k = np.linspace(-1.0, 1.0, 41) * max(2.0 * math.sqrt(theta), 0.25)
    k = np.asarray(k, dtype=float)
    target = np.asarray(final(k))

    def phi_cap(rho):
        scale = 1.0 + abs(rho)
        return min(4.0 / (theta * scale) * (1.0 - 1e-9), math.sqrt(4.0 / (theta * scale)))

    def model(x):
        rho = math.tanh(x[0])
        phi = phi_cap(rho) / (1.0 + math.exp(-x[1]))
        z = phi * k
        return 0.5 * theta * (1.0 + rho * z + np.sqrt((z + rho) ** 2 + 1.0 - rho * rho)), rho, phi

    # seed from the final slice's own shape
    rho0 = final.rho
    slope = 0.5 * (final.left_wing_slope + final.right_wing_slope)
    phi0 = min(max(2.0 * slope / theta, 1e-3), 0.9 * phi_cap(rho0))
    u0 = math.log(phi0 / (phi_cap(rho0) - phi0))
    res = least_squares(lambda x: model(x)[0] - target, [math.atanh(max(min(rho0, 0.99), -0.99)), u0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    _, rho, phi = model(res.x)
    fit = LongEndFit(theta=theta, rho=rho, phi=phi)
    gap = float(np.max(np.asarray(final(CHECK_GRID)) - np.asarray(fit.raw(CHECK_GRID))))
    return LongEndFit(theta=theta, rho=rho, phi=phi, gap=max(0.0, gap))


@dataclass(frozen=True)
class SurfacePoint:
    total_variance: float
    vol: float
    price: float
    density: float


@dataclass(frozen=True)
class CalibratedSurface:
    """Calibrated slices ``(t_i, params_i)`` plus interpolation rules.

    Construction verifies the slices: strictly increasing expiries, strictly
    increasing ATM variances, no calendar violation between any pair and no
    butterfly arbitrage in any slice. It raises :class:`SurfaceError` rather
    than repairing anything.
    """

    times: tuple[float, ...]
    slices: tuple[RawSviParams, ...]
    long_end: LongEndFit | None = None
    forwards: tuple[float, ...] | None = None
    validate: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "slices", tuple(self.slices))
        if len(times) == 0 or len(times) != len(self.slices):
            raise SurfaceError("invalid-surface", "need matching non-empty times and slices")
        if any(t <= 0.0 for t in times) or any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise SurfaceError("invalid-surface", "expiries must be positive and strictly increasing")
        if self.forwards is not None and len(self.forwards) != len(times):
            raise SurfaceError("invalid-surface", "one forward per expiry")
        thetas = tuple(float(s(0.0)) for s in self.slices)
        object.__setattr__(self, "_thetas", thetas)
        if self.validate:
            if any(th <= 0.0 for th in thetas) or any(b <= a for a, b in zip(thetas[:-1], thetas[1:])):
                raise SurfaceError("theta-not-increasing", f"ATM variances {thetas}")
            for i, j in itertools.combinations(range(len(times)), 2):
                amount, kind = calendar_violation(self.slices[i], self.slices[j])
                if amount > 1e-12:
                    raise SurfaceError("calendar-arbitrage", f"slices t={times[i]} and t={times[j]} ({kind}, {amount:.3g})")
            for t, s in zip(times, self.slices):
                rep = check_butterfly(s)
                if not rep.is_free:
                    raise SurfaceError("butterfly-arbitrage", f"slice t={t} min g={rep.min_g:.3g}")
        if self.long_end is None:
            object.__setattr__(self, "long_end", refit_long_end(self.slices[-1]))

    # -- theta curve ---------------------------------------------------------

    @property
    def thetas(self) -> tuple[float, ...]:
        return self._thetas  # type: ignore[attr-defined]

    def theta_slope(self) -> float:
        ts, th = self.times, self.thetas
        if len(ts) == 1:
            slope = th[0] / ts[0]
        else:
            slope = (th[-1] - th[-2]) / (ts[-1] - ts[-2])
        return max(slope, MIN_THETA_SLOPE)

    def theta(self, t: float) -> float:
        """Piecewise-linear ATM variance through the origin, linear past ``t_n``."""
        ts, th = self.times, self.thetas
        if t > ts[-1]:
            return th[-1] + self.theta_slope() * (t - ts[-1])
        return float(np.interp(t, (0.0,) + ts, (0.0,) + th))

    def forward(self, t: float) -> float | None:
        """Forward at ``t``, log-linear in ``t`` between (and beyond) quoted expiries."""
        if self.forwards is None:
            return None
        ts = np.asarray(self.times)
        lf = np.log(np.asarray(self.forwards))
        if len(ts) == 1:
            return float(self.forwards[0])
        if t <= ts[0]:
            i = 0
        elif t >= ts[-1]:
            i = len(ts) - 2
        else:
            i = int(np.searchsorted(ts, t)) - 1
        slope = (lf[i + 1] - lf[i]) / (ts[i + 1] - ts[i])
        return float(math.exp(lf[i] + slope * (t - ts[i])))

    def bracket(self, t: float) -> int:
        """Index ``i`` with ``t_i <= t <= t_{i+1}``."""
        ts = self.times
        if not ts[0] <= t <= ts[-1] or len(ts) < 2:
            raise SurfaceError("out-of-bracket", f"t={t} outside [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        return min(i, len(ts) - 2)

    def mixing_weight(self, t: float, i: int) -> float:
        th1 = self.thetas[i] if i >= 0 else 0.0
        th2 = self.thetas[i + 1]
        s2 = math.sqrt(th2)
        return (s2 - math.sqrt(self.theta(t))) / (s2 - math.sqrt(th1))

    # -- evaluation ------------------------------------------------------------

    def slice_index(self, t: float) -> int | None:
        try:
            return self.times.index(float(t))
        except ValueError:
            return None

    def long_end_slice(self, t: float) -> RawSviParams:
        return self.long_end.raw.shifted(self.theta(t) - self.thetas[-1])


def interp_price(k, t: float, surface: CalibratedSurface):
    """Normalised call price between two calibrated expiries."""
    i = surface.bracket(t)
    t1, t2 = surface.times[i], surface.times[i + 1]
    if t == t1:
        alpha = 1.0
    elif t == t2:
        alpha = 0.0
    else:
        alpha = surface.mixing_weight(t, i)
    s1, s2 = surface.slices[i], surface.slices[i + 1]
    c1 = np.asarray(bs_call(k, np.asarray(s1(k))))
    c2 = np.asarray(bs_call(k, np.asarray(s2(k))))
    out = alpha * c1 + (1.0 - alpha) * c2
    return float(out) if out.ndim == 0 else out


def interp_vol(k: float, t: float, surface: CalibratedSurface) -> float:
    """Implied volatility of :func:`interp_price`."""
    i = surface.slice_index(t)
    if i is not None:
        return math.sqrt(float(surface.slices[i](k)) / t)
    w = implied_total_variance(k, interp_price(k, t, surface))
    return math.sqrt(w / t)


def extrap_short(k, t: float, surface: CalibratedSurface):
    """Price for ``0 < t < t_1``: intrinsic value mixed with the first slice."""
    t1 = surface.times[0]
    if not t > 0.0:
        raise SurfaceError("nonpositive-expiry", f"t={t}")
    if t > t1:
        raise SurfaceError("out-of-bracket", f"t={t} > t1={t1}")
    alpha = 0.0 if t == t1 else surface.mixing_weight(t, -1)
    k_arr = np.asarray(k, dtype=float)
    intrinsic = np.maximum(-np.expm1(k_arr), 0.0)
    c1 = np.asarray(bs_call(k_arr, np.asarray(surface.slices[0](k_arr))))
    out = alpha * intrinsic + (1.0 - alpha) * c1
    return float(out) if out.ndim == 0 else out


def extrap_long(k, t: float, surface: CalibratedSurface):
    """Total variance for ``t >= t_n``: refit slice plus ``theta_t - theta_n``."""
    tn = surface.times[-1]
    if t < tn:
        raise SurfaceError("out-of-bracket", f"t={t} < tn={tn}")
    return surface.long_end_slice(t)(k)


def query(k: float, t: float, surface: CalibratedSurface) -> SurfacePoint:
    """``(w, vol, price, density)`` at one point of the surface.

    Below ``t_1`` the price mixes in the intrinsic value, whose law is a unit
    mass at ``k = 0``; the returned density is the continuous part only and
    integrates to ``1 - alpha_t``.
    """
    if not t > 0.0:
        raise SurfaceError("nonpositive-expiry", f"t={t}")
    k = float(k)
    i = surface.slice_index(t)
    if i is not None:
        s = surface.slices[i]
        w = float(s(k))
        return SurfacePoint(w, math.sqrt(w / t), float(bs_call(k, w)), float(density_at(k, s)))
    ts = surface.times
    if t > ts[-1]:
        s = surface.long_end_slice(t)
        w = float(s(k))
        return SurfacePoint(w, math.sqrt(w / t), float(bs_call(k, w)), float(density_at(k, s)))
    if t < ts[0]:
        alpha = surface.mixing_weight(t, -1)
        price = float(extrap_short(k, t, surface))
        dens = (1.0 - alpha) * float(density_at(k, surface.slices[0]))
    else:
        j = surface.bracket(t)
        alpha = surface.mixing_weight(t, j)
        price = float(interp_price(k, t, surface))
        dens = alpha * float(density_at(k, surface.slices[j])) + (1.0 - alpha) * float(density_at(k, surface.slices[j + 1]))
    w = implied_total_variance(k, price)
    return SurfacePoint(w, math.sqrt(w / t), price, dens)


def price(k, t: float, surface: CalibratedSurface):
    """Normalised call price anywhere on the surface (vectorised in ``k``)."""
    i = surface.slice_index(t)
    if i is not None:
        s = surface.slices[i]
        return bs_call(k, np.asarray(s(k)))
    if t > surface.times[-1]:
        return bs_call(k, np.asarray(extrap_long(k, t, surface)))
    if t < surface.times[0]:
        return extrap_short(k, t, surface)
    return interp_price(k, t, surface)


def density(k, t: float, surface: CalibratedSurface):
    """Vectorised density of ``ln(S_t/F_t)`` (continuous part; see :func:`query`)."""
    k = np.asarray(k, dtype=float)
    i = surface.slice_index(t)
    if i is not None:
        return density_at(k, surface.slices[i])
    if t > surface.times[-1]:
        return density_at(k, surface.long_end_slice(t))
    if t < surface.times[0]:
        return (1.0 - surface.mixing_weight(t, -1)) * np.asarray(density_at(k, surface.slices[0]))
    j = surface.bracket(t)
    a = surface.mixing_weight(t, j)
    return a * np.asarray(density_at(k, surface.slices[j])) + (1.0 - a) * np.asarray(density_at(k, surface.slices[j + 1]))


def build_surface(times: Sequence[float], slices: Sequence[RawSviParams], forwards=None) -> CalibratedSurface:
    return CalibratedSurface(tuple(times), tuple(slices), forwards=None if forwards is None else tuple(forwards))
