"""Raw, natural and jump-wings SVI slices and the exact maps between them.

A *smile* anywhere in this package is any callable ``k -> w``. Objects that
also expose ``derivs(k) -> (w, w', w'')`` get analytic derivatives; other
callables are differentiated by central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters

FD_STEP = 1e-5
_JW_TOL = 1e-12


def _as_out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class RawSviParams:
    """``w(k) = a + b (rho (k - m) + sqrt((k - m)^2 + sigma^2))``."""

    a: float
    b: float
    rho: float
    m: float
    sigma: float

    def __post_init__(self) -> None:
        vals = (self.a, self.b, self.rho, self.m, self.sigma)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameters("invalid-raw-svi", f"non-finite value in {vals}")
        if self.b < 0.0:
            raise InvalidParameters("invalid-raw-svi", f"b={self.b} < 0")
        if self.sigma <= 0.0:
            raise InvalidParameters("invalid-raw-svi", f"sigma={self.sigma} <= 0")
        if not abs(self.rho) < 1.0:
            raise InvalidParameters("invalid-raw-svi", f"|rho|={abs(self.rho)} >= 1")
        if self.min_variance() < -1e-14:
            raise InvalidParameters("invalid-raw-svi", f"negative minimum variance {self.min_variance()}")

    def __call__(self, k):
        return w_raw(k, self)

    def derivs(self, k):
        return w_raw_derivs(k, self)

    def min_variance(self) -> float:
        return self.a + self.b * self.sigma * math.sqrt(1.0 - self.rho * self.rho)

    def argmin(self) -> float:
        return self.m - self.rho * self.sigma / math.sqrt(1.0 - self.rho * self.rho)

    @property
    def right_wing_slope(self) -> float:
        return self.b * (1.0 + self.rho)

    @property
    def left_wing_slope(self) -> float:
        return self.b * (1.0 - self.rho)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.a, self.b, self.rho, self.m, self.sigma)

    def shifted(self, alpha: float) -> "RawSviParams":
        """Same slice moved up by ``alpha`` in total variance."""
        return RawSviParams(self.a + alpha, self.b, self.rho, self.m, self.sigma)


@dataclass(frozen=True)
class NaturalSviParams:
    """``w(k) = delta + omega/2 (1 + zeta rho (k-mu) + sqrt((zeta (k-mu) + rho)^2 + 1 - rho^2))``."""

    delta: float
    mu: float
    rho: float
    omega: float
    zeta: float

    def __post_init__(self) -> None:
        if self.omega < 0.0:
            raise InvalidParameters("invalid-natural-svi", f"omega={self.omega} < 0")
        if self.zeta <= 0.0:
            raise InvalidParameters("invalid-natural-svi", f"zeta={self.zeta} <= 0")
        if not abs(self.rho) < 1.0:
            raise InvalidParameters("invalid-natural-svi", f"|rho|={abs(self.rho)} >= 1")

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        z = self.zeta * (k - self.mu)
        out = self.delta + 0.5 * self.omega * (
            1.0 + self.rho * z + np.sqrt((z + self.rho) ** 2 + 1.0 - self.rho**2)
        )
        return _as_out(out)


@dataclass(frozen=True)
class JumpWingsParams:
    """Jump-wings description of a slice at expiry ``t``.

    ``v`` ATM variance, ``psi`` ATM volatility skew, ``p``/``c`` put/call wing
    slopes, ``v_tilde`` minimum variance. Variances are per year.
    """

    t: float
    v: float
    psi: float
    p: float
    c: float
    v_tilde: float

    def __post_init__(self) -> None:
        if not self.t > 0.0:
            raise InvalidParameters("invalid-jw", f"t={self.t} <= 0")
        if not self.v > 0.0:
            raise InvalidParameters("invalid-jw", f"v={self.v} <= 0")
        if self.p < -_JW_TOL or self.c < -_JW_TOL:
            raise InvalidParameters("invalid-jw", f"negative wing p={self.p}, c={self.c}")
        if self.v_tilde < -_JW_TOL or self.v_tilde > self.v * (1.0 + _JW_TOL):
            raise InvalidParameters("invalid-jw", f"need v >= v_tilde >= 0, got v={self.v}, v_tilde={self.v_tilde}")

    @property
    def is_convex(self) -> bool:
        """``-p <= 2 psi <= c``, i.e. the implied raw ``beta`` lies in ``[-1, 1]``."""
        return -self.p - _JW_TOL <= 2.0 * self.psi <= self.c + _JW_TOL

    def replace(self, **changes) -> "JumpWingsParams":
        from dataclasses import replace

        return replace(self, **changes)


# --------------------------------------------------------------------------
# raw SVI evaluation


def w_raw(k, p: RawSviParams):
    k = np.asarray(k, dtype=float)
    x = k - p.m
    out = p.a + p.b * (p.rho * x + np.sqrt(x * x + p.sigma * p.sigma))
    return _as_out(out)


def w_raw_derivs(k, p: RawSviParams):
    """Analytic ``(w, w', w'')`` of a raw SVI slice."""
    k = np.asarray(k, dtype=float)
    x = k - p.m
    r = np.sqrt(x * x + p.sigma * p.sigma)
    w = p.a + p.b * (p.rho * x + r)
    w1 = p.b * (p.rho + x / r)
    w2 = p.b * p.sigma * p.sigma / r**3
    return _as_out(w), _as_out(w1), _as_out(w2)


def smile_derivs(smile, k, h: float = FD_STEP):
    """``(w, w', w'')`` for any smile; finite differences when no ``derivs``."""
    if hasattr(smile, "derivs"):
        return smile.derivs(k)
    k = np.asarray(k, dtype=float)
    w0 = np.asarray(smile(k), dtype=float)
    wp = np.asarray(smile(k + h), dtype=float)
    wm = np.asarray(smile(k - h), dtype=float)
    w1 = (wp - wm) / (2.0 * h)
    w2 = (wp - 2.0 * w0 + wm) / (h * h)
    return _as_out(w0), _as_out(w1), _as_out(w2)


# --------------------------------------------------------------------------
# conversions


def natural_to_raw(n: NaturalSviParams) -> RawSviParams:
    s = math.sqrt(1.0 - n.rho * n.rho)
    return RawSviParams(
        a=n.delta + 0.5 * n.omega * (1.0 - n.rho * n.rho),
        b=0.5 * n.omega * n.zeta,
        rho=n.rho,
        m=n.mu - n.rho / n.zeta,
        sigma=s / n.zeta,
    )


def raw_to_natural(r: RawSviParams) -> NaturalSviParams:
    s = math.sqrt(1.0 - r.rho * r.rho)
    omega = 2.0 * r.b * r.sigma / s
    return NaturalSviParams(
        delta=r.a - 0.5 * omega * (1.0 - r.rho * r.rho),
        mu=r.m + r.rho * r.sigma / s,
        rho=r.rho,
        omega=omega,
        zeta=s / r.sigma,
    )


def raw_to_jw(r: RawSviParams, t: float) -> JumpWingsParams:
    if not t > 0.0:
        raise InvalidParameters("invalid-expiry", f"t={t} <= 0")
    root = math.hypot(r.m, r.sigma)
    w_t = r.a + r.b * (-r.rho * r.m + root)
    if not w_t > 0.0:
        raise InvalidParameters("nonpositive-atm-variance", f"w(0)={w_t}")
    sw = math.sqrt(w_t)
    return JumpWingsParams(
        t=t,
        v=w_t / t,
        psi=0.5 * r.b / sw * (r.rho - r.m / root),
        p=r.b * (1.0 - r.rho) / sw,
        c=r.b * (1.0 + r.rho) / sw,
        v_tilde=r.min_variance() / t,
    )


def jw_to_raw(j: JumpWingsParams) -> RawSviParams:
    """Invert :func:`raw_to_jw`.

    With ``beta = rho - 2 psi sqrt(w)/b`` the translation and width come out as

        m     = (v - v~) t beta        / (b D)
        sigma = (v - v~) t sqrt(1-b^2) / (b D),   D = 1 - rho beta - sqrt((1-beta^2)(1-rho^2))

    which is the usual ``alpha = sigma/m`` construction with the sign
    bookkeeping multiplied through. ``beta = 0`` is exactly the ``m = 0`` case
    and needs no special branch.

    Raises
    ------
    InvalidParameters
        ``"degenerate-flat"`` when ``b = 0`` or the recovered ``sigma`` is 0
        (``beta = ±1``); ``"non-convex-jw-parameters"`` when ``beta`` is
        outside ``[-1, 1]``; ``"degenerate-jw"`` when ``D = 0`` (smile minimum
        sits at the money, so ``sigma`` is not identified).
    """
    w = j.v * j.t
    sw = math.sqrt(w)
    b = 0.5 * sw * (j.c + j.p)
    if b <= 0.0:
        raise InvalidParameters("degenerate-flat", "b = 0")
    rho = 1.0 - j.p * sw / b
    beta = rho - 2.0 * j.psi * sw / b
    if abs(beta) > 1.0 + 1e-12:
        raise InvalidParameters("non-convex-jw-parameters", f"beta={beta} outside [-1, 1]")
    beta = min(1.0, max(-1.0, beta))
    if not abs(rho) < 1.0:
        raise InvalidParameters("degenerate-flat", f"rho={rho} on the boundary")
    s_beta = math.sqrt(max(0.0, 1.0 - beta * beta))
    s_rho = math.sqrt(1.0 - rho * rho)
    denom = 1.0 - rho * beta - s_beta * s_rho
    excess = (j.v - j.v_tilde) * j.t
    if denom <= 1e-15 or excess <= 0.0:
        if s_beta == 0.0:
            raise InvalidParameters("degenerate-flat", "beta = ±1 gives sigma = 0")
        raise InvalidParameters("degenerate-jw", "minimum at the money; sigma not identified")
    m = excess * beta / (b * denom)
    sigma = excess * s_beta / (b * denom)
    if not sigma > 0.0:
        raise InvalidParameters("degenerate-flat", "beta = ±1 gives sigma = 0")
    a = j.v_tilde * j.t - b * sigma * s_rho
    return RawSviParams(a=a, b=b, rho=rho, m=m, sigma=sigma)
