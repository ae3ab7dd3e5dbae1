"""Exception hierarchy shared by the library and the CLI."""


class IceBucketsError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IceBucketsError, ValueError):
    """Invalid structural parameters (non power-of-two L or E, bad sizes)."""


class DomainError(IceBucketsError, ValueError):
    """A numeric argument lies outside the domain of a formula."""


class SymbolOverflowError(IceBucketsError, IndexError):
    """Increment requested on the top symbol; the caller must upscale first."""


class SymbolUnderflowError(IceBucketsError, IndexError):
    """Decrement requested on symbol 0."""


class CapacityError(IceBucketsError):
    """A count does not fit the target scale (downscale or fixed-capacity overflow)."""


class PolicyError(IceBucketsError):
    """Operation not allowed under the array's configured policy."""


class TraceParseError(IceBucketsError, ValueError):
    def __init__(self, path, lineno, line, reason):
        self.path = path
        self.lineno = lineno
        self.line = line
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")


class UndefinedMetricError(IceBucketsError, ValueError):
    """Relative error requested with no flow having a positive true count."""
