"""Exception types shared across the package."""


class TssdrError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TssdrError, ValueError):
    """Input value violates a precondition (non-finite, wrong shape, bad range)."""


class InvalidSpecError(TssdrError, ValueError):
    """A process or simulation specification violates its stationarity constraints."""


class SingularMatrixError(TssdrError, ValueError):
    """A matrix required to be positive definite has a (near-)zero eigenvalue."""


class DegenerateStackError(TssdrError, ValueError):
    """A matrix stack is too degenerate for the requested decomposition."""


class DegenerateSliceError(TssdrError, ValueError):
    """A response slice ended up with too few paired observations."""

    def __init__(self, slice_index, lag, needed):
        self.slice_index = slice_index
        self.lag = lag
        super().__init__(
            f"slice h={slice_index} has fewer than {needed} usable pairs at lag j={lag}"
        )


class TooManySlicesError(TssdrError, ValueError):
    """More slices requested than available response values."""


class EmptyDesignError(TssdrError, ValueError):
    """No regressors selected; caller should fall back to the unconditional mean."""


class ReportSchemaError(TssdrError, ValueError):
    """A report CSV does not match the expected schema."""
