"""SSVI surfaces: ATM variance curve, curvature functions and the static
arbitrage conditions expressed on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameters, SviError
from .smile_params import JumpWingsParams, NaturalSviParams, RawSviParams, natural_to_raw

MIN_THETA_SLOPE = 1e-8


# --------------------------------------------------------------------------
# ATM total variance curve


@dataclass(frozen=True)
class ThetaCurve:
    """ATM total variance as a function of expiry.

    Either ``vol`` is set (``theta = vol**2 t``) or ``times``/``thetas`` hold
    samples joined piecewise-linearly through the origin. Past the last sample
    the curve continues linearly with the last segment's slope, floored at
    ``1e-8`` per year.
    """

    times: tuple[float, ...] = ()
    thetas: tuple[float, ...] = ()
    vol: float | None = None

    def __post_init__(self) -> None:
        if self.vol is not None:
            if not self.vol > 0.0:
                raise InvalidParameters("invalid-theta-curve", f"vol={self.vol}")
            return
        if len(self.times) == 0 or len(self.times) != len(self.thetas):
            raise InvalidParameters("invalid-theta-curve", "need matching non-empty samples")
        t = np.asarray(self.times, dtype=float)
        th = np.asarray(self.thetas, dtype=float)
        if np.any(t <= 0.0) or np.any(np.diff(t) <= 0.0):
            raise InvalidParameters("invalid-theta-curve", "times must be positive and strictly increasing")
        if np.any(th <= 0.0):
            raise InvalidParameters("invalid-theta-curve", "theta must be positive for t > 0")
        object.__setattr__(self, "times", tuple(float(x) for x in t))
        object.__setattr__(self, "thetas", tuple(float(x) for x in th))

    @classmethod
    def from_vol(cls, vol: float) -> "ThetaCurve":
        return cls(vol=vol)

    @property
    def is_monotone(self) -> bool:
        if self.vol is not None:
            return True
        return bool(np.all(np.diff(np.asarray((0.0,) + self.thetas)) >= 0.0))

    def tail_slope(self) -> float:
        if self.vol is not None:
            return self.vol**2
        if len(self.times) == 1:
            slope = self.thetas[0] / self.times[0]
        else:
            slope = (self.thetas[-1] - self.thetas[-2]) / (self.times[-1] - self.times[-2])
        return max(slope, MIN_THETA_SLOPE)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if self.vol is not None:
            out = self.vol**2 * t_arr
        else:
            ts = np.asarray((0.0,) + self.times)
            ths = np.asarray((0.0,) + self.thetas)
            out = np.interp(t_arr, ts, ths)
            beyond = t_arr > ts[-1]
            out = np.where(beyond, ths[-1] + self.tail_slope() * (t_arr - ts[-1]), out)
        return float(out) if out.ndim == 0 else out

    def inverse(self, theta: float) -> float:
        """Smallest ``t`` with ``theta_t = theta`` (monotone curves only)."""
        if self.vol is not None:
            return theta / self.vol**2
        ts = np.asarray((0.0,) + self.times)
        ths = np.asarray((0.0,) + self.thetas)
        if theta <= ths[-1]:
            i = int(np.searchsorted(ths, theta, side="left"))
            i = max(i, 1)
            t0, t1, h0, h1 = ts[i - 1], ts[i], ths[i - 1], ths[i]
            return float(t0 + (theta - h0) * (t1 - t0) / (h1 - h0)) if h1 > h0 else float(t0)
        return float(ts[-1] + (theta - ths[-1]) / self.tail_slope())

    def support(self) -> tuple[float, float]:
        if self.vol is not None:
            return (self(1.0 / 365.0), self(10.0))
        return (self.thetas[0], self.thetas[-1])


# --------------------------------------------------------------------------
# curvature functions phi(theta)


def _heston_series(x):
    # 1 - (1 - e^-x)/x and its x-derivative, for small x
    f = x / 2 - x**2 / 6 + x**3 / 24 - x**4 / 120 + x**5 / 720 - x**6 / 5040
    df = 1 / 2 - x / 3 + x**2 / 8 - x**3 / 30 + x**4 / 144 - x**5 / 840
    return f, df


@dataclass(frozen=True)
class HestonLike:
    """``phi(theta) = 1/(lam theta) (1 - (1 - e^{-lam theta})/(lam theta))``."""

    lam: float

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise InvalidParameters("invalid-phi", f"lambda={self.lam}")

    def theta_phi(self, theta):
        x = self.lam * np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = 1.0 + np.expm1(-x) / x
        small, _ = _heston_series(x)
        return np.where(x < 1e-2, small, exact) / self.lam

    def d_theta_phi(self, theta):
        """``d/dtheta (theta phi(theta))``."""
        x = self.lam * np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            exact = (-np.expm1(-x) - x * np.exp(-x)) / (x * x)
        _, small = _heston_series(x)
        return np.where(x < 1e-2, small, exact)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.theta_phi(theta) / theta


@dataclass(frozen=True)
class PowerLaw:
    """``phi(theta) = eta theta^-gamma``."""

    eta: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.eta > 0.0 or not 0.0 < self.gamma < 1.0:
            raise InvalidParameters("invalid-phi", f"eta={self.eta}, gamma={self.gamma}")

    def __call__(self, theta):
        return self.eta * np.asarray(theta, dtype=float) ** -self.gamma

    def theta_phi(self, theta):
        return self.eta * np.asarray(theta, dtype=float) ** (1.0 - self.gamma)

    def d_theta_phi(self, theta):
        return self.eta * (1.0 - self.gamma) * np.asarray(theta, dtype=float) ** -self.gamma


@dataclass(frozen=True)
class BoundedPowerLaw:
    """``phi(theta) = eta / (theta^gamma (1 + theta)^(1 - gamma))``.

    Free of static arbitrage on the whole surface when ``eta (1 + |rho|) <= 2``.
    """

    eta: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.eta > 0.0 or not 0.0 < self.gamma < 1.0:
            raise InvalidParameters("invalid-phi", f"eta={self.eta}, gamma={self.gamma}")

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.eta * theta**-self.gamma * (1.0 + theta) ** (self.gamma - 1.0)

    def theta_phi(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.eta * (theta / (1.0 + theta)) ** (1.0 - self.gamma)

    def d_theta_phi(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.eta * (1.0 - self.gamma) * theta**-self.gamma * (1.0 + theta) ** (self.gamma - 2.0)


PhiFamily = HestonLike | PowerLaw | BoundedPowerLaw


# --------------------------------------------------------------------------
# the surface


@dataclass(frozen=True)
class SsviSurface:
    rho: float
    phi: PhiFamily
    theta: ThetaCurve

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1.0:
            raise InvalidParameters("invalid-ssvi", f"|rho|={abs(self.rho)} >= 1")

    def slice_at_theta(self, theta: float) -> RawSviParams:
        """The SSVI smile at ATM total variance ``theta`` as a raw slice."""
        if not theta > 0.0:
            raise InvalidParameters("nonpositive-theta", f"theta={theta}")
        phi = float(self.phi(theta))
        return natural_to_raw(NaturalSviParams(0.0, 0.0, self.rho, theta, phi))

    def slice(self, t: float) -> RawSviParams:
        return self.slice_at_theta(float(self.theta(t)))

    def w(self, k, t):
        return w_ssvi(k, self.theta(t), self)


def w_ssvi(k, theta, s: SsviSurface):
    """``theta/2 (1 + rho phi k + sqrt((phi k + rho)^2 + 1 - rho^2))``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0):
        raise InvalidParameters("nonpositive-theta", "theta must be > 0")
    k = np.asarray(k, dtype=float)
    phi = s.phi(theta)
    x = phi * k
    rho = s.rho
    out = 0.5 * theta * (1.0 + rho * x + np.sqrt((x + rho) ** 2 + (1.0 - rho * rho)))
    return float(out) if out.ndim == 0 else out


def atm_skew(t: float, s: SsviSurface) -> float:
    """ATM volatility skew ``d sigma_BS / dk`` at ``k = 0``."""
    theta = float(s.theta(t))
    return s.rho * math.sqrt(theta) * float(s.phi(theta)) / (2.0 * math.sqrt(t))


def ssvi_to_jw(t: float, s: SsviSurface) -> JumpWingsParams:
    theta = float(s.theta(t))
    phi = float(s.phi(theta))
    st = math.sqrt(theta)
    rho = s.rho
    return JumpWingsParams(
        t=t,
        v=theta / t,
        psi=0.5 * rho * st * phi,
        p=0.5 * st * phi * (1.0 - rho),
        c=0.5 * st * phi * (1.0 + rho),
        v_tilde=theta / t * (1.0 - rho * rho),
    )


# --------------------------------------------------------------------------
# condition checks


@dataclass(frozen=True)
class CalendarConditionReport:
    theta_monotone: bool
    min_gamma: float
    max_gamma: float
    gamma_upper_bound: float
    first_violation_theta: float | None
    passed: bool


@dataclass(frozen=True)
class ButterflyConditionReport:
    max_cond1: float  # theta phi (1 + |rho|), must stay < 4
    max_cond2: float  # theta phi^2 (1 + |rho|), must stay <= 4
    first_violation_theta: float | None
    valid_theta_max: float | None  # edge of the passing region, refined; None if all pass
    boundary: bool  # cond1 hits exactly 4 somewhere on the grid
    passed: bool


@dataclass(frozen=True)
class StaticConditionReport:
    calendar: CalendarConditionReport
    butterfly: ButterflyConditionReport
    valid_t_max: float | None  # expiry where the first condition breaks; None if never on the grid

    @property
    def passed(self) -> bool:
        return self.calendar.passed and self.butterfly.passed


def default_theta_grid(s: SsviSurface, n: int = 200) -> np.ndarray:
    lo, hi = s.theta.support()
    return np.logspace(math.log10(lo / 10.0), math.log10(hi * 10.0), n)


def gamma_upper_bound(rho: float) -> float:
    if rho == 0.0:
        return math.inf
    return (1.0 + math.sqrt(1.0 - rho * rho)) / (rho * rho)


def check_calendar_conditions(s: SsviSurface, theta_grid=None) -> CalendarConditionReport:
    """Theta non-decreasing and ``0 <= d(theta phi)/dtheta <= (1 + sqrt(1-rho^2))/rho^2 phi``."""
    grid = default_theta_grid(s) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    gamma = np.asarray(s.phi.d_theta_phi(grid)) / np.asarray(s.phi(grid))
    upper = gamma_upper_bound(s.rho)
    bad = (gamma < 0.0) | (gamma > upper)
    first = float(grid[np.argmax(bad)]) if np.any(bad) else None
    mono = s.theta.is_monotone
    return CalendarConditionReport(
        theta_monotone=mono,
        min_gamma=float(np.min(gamma)),
        max_gamma=float(np.max(gamma)),
        gamma_upper_bound=upper,
        first_violation_theta=first,
        passed=mono and first is None,
    )


def _butterfly_margin(s: SsviSurface, theta: float) -> float:
    # positive while both conditions hold
    scale = 1.0 + abs(s.rho)
    tp = float(s.phi.theta_phi(theta))
    phi = float(s.phi(theta))
    return min(4.0 - tp * scale, 4.0 - tp * phi * scale)


def check_butterfly_conditions(s: SsviSurface, theta_grid=None) -> ButterflyConditionReport:
    """``theta phi (1+|rho|) < 4`` and ``theta phi^2 (1+|rho|) <= 4`` on the grid."""
    grid = default_theta_grid(s) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    scale = 1.0 + abs(s.rho)
    tp = np.asarray(s.phi.theta_phi(grid))
    c1 = tp * scale
    c2 = tp * np.asarray(s.phi(grid)) * scale
    bad = (c1 >= 4.0) | (c2 > 4.0)
    boundary = bool(np.any(c1 == 4.0))
    first = None
    edge = None
    if np.any(bad):
        i = int(np.argmax(bad))
        first = float(grid[i])
        if i > 0:
            lo, hi = float(grid[i - 1]), first
            try:
                edge = brentq(lambda th: _butterfly_margin(s, th), lo, hi, xtol=1e-14, rtol=1e-14)
            except ValueError:
                edge = lo
    return ButterflyConditionReport(
        max_cond1=float(np.max(c1)),
        max_cond2=float(np.max(c2)),
        first_violation_theta=first,
        valid_theta_max=edge,
        boundary=boundary,
        passed=first is None,
    )


def check_static(s: SsviSurface, theta_grid=None) -> StaticConditionReport:
    cal = check_calendar_conditions(s, theta_grid)
    fly = check_butterfly_conditions(s, theta_grid)
    edges = []
    if cal.first_violation_theta is not None:
        edges.append(cal.first_violation_theta)
    if fly.first_violation_theta is not None:
        edges.append(fly.valid_theta_max if fly.valid_theta_max is not None else fly.first_violation_theta)
    valid_t = s.theta.inverse(min(edges)) if edges else None
    return StaticConditionReport(calendar=cal, butterfly=fly, valid_t_max=valid_t)


# --------------------------------------------------------------------------
# adding a non-negative increasing function of time


@dataclass(frozen=True)
class AlphaShiftedSurface:
    """``(k, t) -> w_ssvi(k, theta_t) + alpha(t)``."""

    base: SsviSurface
    alpha: Callable[[float], float]

    def slice(self, t: float) -> RawSviParams:
        return self.base.slice(t).shifted(float(self.alpha(t)))

    def w(self, k, t):
        return np.asarray(self.base.w(k, t)) + np.asarray(self.alpha(t))


def alpha_shift(s: SsviSurface, alpha, t_grid=None) -> AlphaShiftedSurface:
    """Shift an SSVI surface by a non-negative, non-decreasing ``alpha(t)``.

    ``alpha`` is validated on ``t_grid`` (default: 400 points on ``[0, 10]``
    plus the theta sample times).

    Raises
    ------
    SviError
        ``"invalid-alpha"`` if alpha is negative or decreasing on the grid.
    """
    if t_grid is None:
        t_grid = np.union1d(np.linspace(0.0, 10.0, 400), np.asarray(s.theta.times, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.array([float(alpha(t)) for t in t_grid])
    if np.any(vals < 0.0) or np.any(np.diff(vals) < 0.0):
        raise SviError("invalid-alpha", "alpha must be non-negative and non-decreasing")
    return AlphaShiftedSurface(base=s, alpha=alpha)


def alpha_repair_available(raw: RawSviParams, t: float) -> bool:
    """Whether a positive alpha shift can help repair this slice: ``v (1 - rho^2) < v~``."""
    from .smile_params import raw_to_jw

    j = raw_to_jw(raw, t)
    return j.v * (1.0 - raw.rho**2) < j.v_tilde
