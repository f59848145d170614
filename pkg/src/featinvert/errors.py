"""Exception hierarchy shared across the package."""


class FeatInvertError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FeatInvertError):
    """Operands have incompatible or unsupported shapes."""


class FormatError(FeatInvertError):
    """A file is not in a supported raster or container format."""


class CorpusError(FeatInvertError):
    """A patch corpus cannot be built or is unusable."""


class NumericError(FeatInvertError):
    """A numerical operation failed (non-finite input, failed factorization)."""


class ContractError(FeatInvertError):
    """An argument violates a documented precondition."""


class DegenerateInputError(FeatInvertError):
    """Input is degenerate for the requested statistic (e.g. constant image)."""
