"""Exception hierarchy shared across the package."""


class RmtWhitenError(Exception):
    """Base class for all package errors."""


class ContractError(RmtWhitenError, ValueError):
    """An input violated a documented precondition."""


class DomainError(RmtWhitenError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class NumericalError(RmtWhitenError, ArithmeticError):
    """A numerical routine failed to converge."""


class UnsupportedSizeError(RmtWhitenError, ValueError):
    pass


class RankDeficiencyError(RmtWhitenError, ValueError):
    """The inter-cluster matrix has rank smaller than K."""


class DegenerateMapError(RmtWhitenError):
    """No spike survived, so the whitening map would be identically zero.

    ``diagnostics`` carries per-spike information for logging.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateSpectrumError(RmtWhitenError):
    """Random contraction kept producing near-degenerate eigenvalues."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(RmtWhitenError, ValueError):
    pass
