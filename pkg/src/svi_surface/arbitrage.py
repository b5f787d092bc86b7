"""Butterfly and calendar-spread arbitrage detection for SVI slices."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from .errors import ArbitrageError
from .smile_params import RawSviParams, smile_derivs

G_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-9
MAX_WING_SLOPE = 2.0
DEFAULT_GRID = 2001


@dataclass(frozen=True)
class ButterflyReport:
    min_g: float
    min_g_location: float
    d_plus_limit_ok: bool
    is_free: bool
    right_wing_slope: float = float("nan")


@dataclass(frozen=True)
class CrossingReport:
    roots: tuple[float, ...]
    crossedness: float
    quartic_coeffs: tuple[float, float, float, float, float]


@dataclass(frozen=True)
class CalendarFinding:
    """A calendar violation between slices ``i < j`` (indices into the input)."""

    i: int
    j: int
    value: float
    kind: str = "crossing"  # or "order" when the later slice lies wholly below


@dataclass(frozen=True)
class SurfaceArbitrageReport:
    butterfly: tuple[ButterflyReport, ...]
    calendar: tuple[CalendarFinding, ...] = field(default_factory=tuple)

    @property
    def is_free(self) -> bool:
        return all(b.is_free for b in self.butterfly) and not self.calendar


# --------------------------------------------------------------------------
# butterfly


def g_function(k, smile):
    """``g = (1 - k w'/(2w))^2 - w'^2/4 (1/w + 1/4) + w''/2``.

    Non-negativity of ``g`` (together with the right-wing condition) is
    equivalent to a non-negative density.
    """
    w, w1, w2 = smile_derivs(smile, k)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ArbitrageError("nonpositive-variance", "g needs w(k) > 0")
    k = np.asarray(k, dtype=float)
    w1 = np.asarray(w1)
    w2 = np.asarray(w2)
    out = (1.0 - k * w1 / (2.0 * w)) ** 2 - 0.25 * w1 * w1 * (1.0 / w + 0.25) + 0.5 * w2
    return float(out) if out.ndim == 0 else out


def default_scan_range(smile) -> tuple[float, float]:
    m = getattr(smile, "m", None)
    sigma = getattr(smile, "sigma", None)
    if m is None or sigma is None:
        return (-5.0, 5.0)
    half = 5.0 * (sigma + abs(m) + 1.0)
    return (m - half, m + half)


def _right_wing_slope(smile, k_hi: float) -> float:
    slope = getattr(smile, "right_wing_slope", None)
    if slope is not None:
        return float(slope)
    far = max(1e3, 100.0 * abs(k_hi))
    return float((smile(2.0 * far) - smile(far)) / far)


def check_butterfly(smile, k_range: tuple[float, float] | None = None, n_grid: int = DEFAULT_GRID) -> ButterflyReport:
    """Scan ``g`` on a grid, polish local minima, and test the right wing.

    The wing condition ``d+ -> -inf`` holds iff the asymptotic right-wing slope
    of ``w`` is strictly below 2; equality is treated as a failure.
    """
    if n_grid < 100:
        raise ValueError("n_grid must be at least 100")
    lo, hi = k_range if k_range is not None else default_scan_range(smile)
    ks = np.linspace(lo, hi, n_grid)
    gs = np.asarray(g_function(ks, smile))

    i_min = int(np.argmin(gs))
    best_k, best_g = float(ks[i_min]), float(gs[i_min])

    interior = np.flatnonzero((gs[1:-1] <= gs[:-2]) & (gs[1:-1] <= gs[2:])) + 1
    if interior.size > 8:
        interior = interior[np.argsort(gs[interior])[:8]]
    for i in interior:
        a, c = float(ks[i - 1]), float(ks[i + 1])
        try:
            res = minimize_scalar(
                lambda x: float(g_function(x, smile)),
                bracket=(a, float(ks[i]), c),
                method="golden",
                options={"xtol": 1e-10},
            )
        except ValueError:
            continue
        if lo <= res.x <= hi and res.fun < best_g:
            best_k, best_g = float(res.x), float(res.fun)

    slope = _right_wing_slope(smile, hi)
    wing_ok = slope < MAX_WING_SLOPE
    return ButterflyReport(
        min_g=best_g,
        min_g_location=best_k,
        d_plus_limit_ok=wing_ok,
        is_free=(best_g >= -G_TOL) and wing_ok,
        right_wing_slope=slope,
    )


# --------------------------------------------------------------------------
# calendar: intersections of two raw slices


def quartic_crossing_coeffs(p1: RawSviParams, p2: RawSviParams) -> tuple[float, float, float, float, float]:
    """Coefficients ``(c4, c3, c2, c1, c0)`` of the quartic whose real roots
    contain every intersection of the two slices.

    Isolating ``b1 sqrt((k-m1)^2 + s1^2)`` and squaring twice gives
    ``Q(k)^2 - 4 b2^2 L(k)^2 ((k-m2)^2 + s2^2) = 0`` with
    ``L = alpha + beta k`` and ``Q = b1^2 R1^2 - b2^2 R2^2 - L^2``.
    """
    alpha = p2.a - p1.a + p1.b * p1.rho * p1.m - p2.b * p2.rho * p2.m
    beta = p2.b * p2.rho - p1.b * p1.rho
    lin = np.array([alpha, beta])
    r1 = np.array([p1.m * p1.m + p1.sigma * p1.sigma, -2.0 * p1.m, 1.0])
    r2 = np.array([p2.m * p2.m + p2.sigma * p2.sigma, -2.0 * p2.m, 1.0])
    lin2 = P.polymul(lin, lin)
    q = P.polysub(P.polysub(p1.b**2 * r1, p2.b**2 * r2), lin2)
    quartic = P.polysub(P.polymul(q, q), 4.0 * p2.b**2 * P.polymul(lin2, r2))
    coeffs = np.zeros(5)
    coeffs[: len(quartic)] = quartic
    return tuple(float(c) for c in coeffs[::-1])


def _diff_and_slope(k: float, p1: RawSviParams, p2: RawSviParams) -> tuple[float, float]:
    w1, d1, _ = p1.derivs(k)
    w2, d2, _ = p2.derivs(k)
    return w1 - w2, d1 - d2


def crossing_points(p1: RawSviParams, p2: RawSviParams) -> list[float]:
    """Sorted log-moneyness points where the two slices intersect.

    Quartic roots come from companion-matrix eigenvalues; each near-real root
    is polished by Newton on the unsquared difference and kept only if
    ``|w1 - w2| <= 1e-9`` there, which discards roots introduced by squaring.
    """
    if p1 == p2:
        raise ArbitrageError("identical-slices")
    coeffs = np.array(quartic_crossing_coeffs(p1, p2))
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        raise ArbitrageError("identical-slices")
    raw_roots = np.roots(coeffs / scale)

    found: list[float] = []
    for z in raw_roots:
        if abs(z.imag) > 1e-5 * (1.0 + abs(z.real)):
            continue
        k = float(z.real)
        d, s = _diff_and_slope(k, p1, p2)
        for _ in range(60):
            if d == 0.0 or s == 0.0:
                break
            k_new = k - d / s
            d_new, s_new = _diff_and_slope(k_new, p1, p2)
            if abs(d_new) >= abs(d):
                break
            k, d, s = k_new, d_new, s_new
        if abs(d) <= ROOT_RESIDUAL_TOL:
            found.append(k)

    found.sort()
    roots: list[float] = []
    for k in found:
        if not roots or abs(k - roots[-1]) > 1e-6 * (1.0 + abs(k)):
            roots.append(k)
    return roots


def crossedness(p1: RawSviParams, p2: RawSviParams) -> float:
    """Largest amount by which the earlier slice ``p1`` exceeds the later
    slice ``p2``, probed between and just beyond their crossing points.

    Zero when the slices do not cross (including when ``p1`` lies wholly
    above ``p2``; see :func:`calendar_violation` for that case).
    """
    try:
        roots = crossing_points(p1, p2)
    except ArbitrageError:
        return 0.0
    if not roots:
        return 0.0
    probes = [roots[0] - 1.0]
    probes += [0.5 * (a + b) for a, b in zip(roots[:-1], roots[1:])]
    probes.append(roots[-1] + 1.0)
    probes = np.asarray(probes)
    c = np.maximum(0.0, np.asarray(p1(probes)) - np.asarray(p2(probes)))
    return float(np.max(c))


def crossing_report(p1: RawSviParams, p2: RawSviParams) -> CrossingReport:
    try:
        roots = tuple(crossing_points(p1, p2))
    except ArbitrageError:
        roots = ()
    return CrossingReport(roots=roots, crossedness=crossedness(p1, p2), quartic_coeffs=quartic_crossing_coeffs(p1, p2))


def calendar_violation(p1: RawSviParams, p2: RawSviParams) -> tuple[float, str]:
    """``(amount, kind)`` of calendar arbitrage between earlier ``p1`` and later ``p2``.

    ``kind`` is ``"crossing"`` (amount = crossedness) or ``"order"`` when the
    slices never cross but ``p1`` sits above ``p2`` everywhere.
    """
    if p1 == p2:
        return 0.0, "crossing"
    roots = crossing_points(p1, p2)
    if roots:
        return crossedness(p1, p2), "crossing"
    gap = float(p1(0.0) - p2(0.0))
    return max(0.0, gap), "order"


def check_surface(slices: list[RawSviParams], k_range: tuple[float, float] | None = None) -> SurfaceArbitrageReport:
    """Butterfly report per slice plus calendar findings for every ordered pair.

    ``slices`` must be sorted by expiry.
    """
    butterfly = tuple(check_butterfly(s, k_range) for s in slices)
    findings = []
    for i, j in itertools.combinations(range(len(slices)), 2):
        amount, kind = calendar_violation(slices[i], slices[j])
        if amount > 0.0:
            findings.append(CalendarFinding(i, j, amount, kind))
    return SurfaceArbitrageReport(butterfly=butterfly, calendar=tuple(findings))


def bisection_crossings(p1: RawSviParams, p2: RawSviParams, lo: float = -5.0, hi: float = 5.0, n: int = 20001) -> list[float]:
    """Sign changes of ``w1 - w2`` on a grid, refined by bisection.

    Independent of the quartic; used as a cross-check.
    """
    ks = np.linspace(lo, hi, n)
    d = np.asarray(p1(ks)) - np.asarray(p2(ks))
    out = []
    for i in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0):
        a, b = float(ks[i]), float(ks[i + 1])
        da = float(d[i])
        if da == 0.0:
            out.append(a)
            continue
        for _ in range(80):
            mid = 0.5 * (a + b)
            dm = float(p1(mid) - p2(mid))
            if dm == 0.0:
                a = b = mid
                break
            if math.copysign(1.0, dm) == math.copysign(1.0, da):
                a, da = mid, dm
            else:
                b = mid
        out.append(0.5 * (a + b))
    dedup: list[float] = []
    for k in sorted(out):
        if not dedup or abs(k - dedup[-1]) > 1e-9:
            dedup.append(k)
    return dedup
