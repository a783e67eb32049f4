"""Exception types shared across the package."""


class DataError(Exception):
    """Invalid input data, file contents, or configuration.

    The CLI maps this to exit code 2; anything else unexpected maps to 3.
    """


class FormatError(DataError):
    """A binary or text artifact does not conform to its declared format."""
