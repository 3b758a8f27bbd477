"""Exception and warning types shared across the package."""


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class ColorSpaceError(ContractError):
    """An image is tagged with the wrong color space for the requested operation."""


class ImageFormatError(ValueError):
    """A file decoded, but its pixel format is not supported."""


class DegenerateInputError(ValueError):
    """Input statistics are singular (for example a perfectly flat channel)."""

    def __init__(self, message, channel=None):
        super().__init__(message)
        self.channel = channel


class DegenerateInputWarning(UserWarning):
    """A degenerate input was handled by a fallback instead of an error."""


class ConvergenceWarning(UserWarning):
    """An iterative solver hit its sweep limit before reaching tolerance."""
