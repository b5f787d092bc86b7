"""Exception types shared across the package."""

from __future__ import annotations


class SviError(ValueError):
    """Base error carrying a short machine-readable ``code``.

    The code is a stable kebab-case tag (``"no-time-value"``,
    ``"identical-slices"`` ...) that callers and tests can match on without
    parsing the message.
    """

    def __init__(self, code: str, message: str | None = None) -> None:
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class InvalidParameters(SviError):
    pass


class PricingError(SviError):
    pass


class ArbitrageError(SviError):
    pass


class CalibrationError(SviError):
    pass


class SurfaceError(SviError):
    pass


class DocumentError(SviError):
    pass
