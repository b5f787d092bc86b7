"""Arbitrage-free SVI and SSVI implied volatility surfaces."""

from .arbitrage import (
    ButterflyReport,
    CalendarFinding,
    CrossingReport,
    SurfaceArbitrageReport,
    bisection_crossings,
    calendar_violation,
    check_butterfly,
    check_surface,
    crossedness,
    crossing_points,
    crossing_report,
    g_function,
    quartic_crossing_coeffs,
)
from .bs_core import bs_call, bs_vega_w, d_plus_minus, density_at, implied_total_variance
from .calibration import (
    FitConfig,
    FitResult,
    QuoteSlice,
    fit_slice,
    fit_sqrt_ssvi,
    fit_surface,
    raw_repair,
    repair_butterfly_guaranteed,
    repair_butterfly_optimal,
    synthetic_quotes,
)
from .errors import (
    ArbitrageError,
    CalibrationError,
    DocumentError,
    InvalidParameters,
    PricingError,
    SurfaceError,
    SviError,
)
from .fileio import ParamsDocument, SliceRecord, load_params, load_quotes, save_params, write_quotes
from .smile_params import (
    JumpWingsParams,
    NaturalSviParams,
    RawSviParams,
    jw_to_raw,
    natural_to_raw,
    raw_to_jw,
    raw_to_natural,
)
from .ssvi import (
    BoundedPowerLaw,
    HestonLike,
    PowerLaw,
    SsviSurface,
    ThetaCurve,
    alpha_repair_available,
    alpha_shift,
    atm_skew,
    check_butterfly_conditions,
    check_calendar_conditions,
    check_static,
    ssvi_to_jw,
)
from .surface_ops import (
    CalibratedSurface,
    LongEndFit,
    SurfacePoint,
    build_surface,
    density,
    price,
    query,
    refit_long_end,
)

__all__ = [name for name in dir() if not name.startswith("_")]
