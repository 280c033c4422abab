"""Exception types shared across the toolkit."""


class CorrstatError(Exception):
    """Base class for all toolkit errors."""


class ParseError(CorrstatError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class DuplicateTicker(CorrstatError):
    def __init__(self, ticker):
        super().__init__(f"duplicate ticker {ticker!r}")
        self.ticker = ticker


class DomainError(CorrstatError):
    pass


class ZeroVariance(CorrstatError):
    def __init__(self, ticker, window=None):
        loc = f" in window {window}" if window is not None else ""
        super().__init__(f"zero variance for {ticker!r}{loc}")
        self.ticker = ticker
        self.window = window


class InsufficientData(CorrstatError):
    pass


class InsufficientSamples(CorrstatError):
    pass


class NumericsError(CorrstatError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class NotPositiveDefinite(CorrstatError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NotSymmetric(CorrstatError):
    pass


class NotNormalized(CorrstatError):
    pass


class IllPosed(CorrstatError):
    def __init__(self, n_assets, n_obs):
        super().__init__(
            f"minimum-variance problem needs more observations than assets, "
            f"got N={n_assets}, T={n_obs}"
        )
        self.n_assets = n_assets
        self.n_obs = n_obs


class DegenerateComponent(CorrstatError):
    pass


class InvalidParameter(CorrstatError):
    pass
