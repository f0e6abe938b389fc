"""Exception hierarchy. Every error raised on bad input derives from FairlensError."""


class FairlensError(ValueError):
    pass


class SchemaError(FairlensError):
    """A required column or field is missing."""


class ParseError(FairlensError):
    """A cell could not be parsed or holds an out-of-domain value."""


class DuplicateKeyError(FairlensError):
    pass


class ValidationError(FairlensError):
    """A structure violates one of its invariants."""


class CoverageError(FairlensError):
    """Inputs that must share an id set do not."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class GeometryError(FairlensError):
    pass


class ShapeError(FairlensError):
    pass


class ConfigError(FairlensError):
    pass
