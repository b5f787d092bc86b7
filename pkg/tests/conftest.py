import numpy as np
import pytest

from svi_surface import (
    BoundedPowerLaw,
    FitConfig,
    RawSviParams,
    SsviSurface,
    ThetaCurve,
    build_surface,
    fit_surface,
    synthetic_quotes,
)

VOGT = RawSviParams(a=-0.0410, b=0.1331, rho=0.3060, m=0.3586, sigma=0.4153)
SYNTH_TIMES = (0.1, 0.25, 0.5, 1.0, 2.0, 3.0)


def synthetic_truth() -> SsviSurface:
    return SsviSurface(-0.6, BoundedPowerLaw(1.2, 0.5), ThetaCurve((1.0,), (0.04,)))


@pytest.fixture(scope="session")
def vogt():
    return VOGT


@pytest.fixture(scope="session")
def truth():
    return synthetic_truth()


@pytest.fixture(scope="session")
def synth_quotes(truth):
    return synthetic_quotes(truth, SYNTH_TIMES)


@pytest.fixture(scope="session")
def synth_fit(synth_quotes):
    return fit_surface(synth_quotes, FitConfig(seed=0))


@pytest.fixture(scope="session")
def synth_surface(synth_fit):
    return build_surface([r.t for r in synth_fit], [r.params for r in synth_fit])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
