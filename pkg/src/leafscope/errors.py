"""Exception hierarchy shared by every leafscope module."""


class LeafscopeError(Exception):
    """Base class for all errors raised by this package."""


# geometry


class DegenerateBisector(LeafscopeError, ValueError):
    pass


class DegenerateRotation(LeafscopeError, ValueError):
    pass


class GimbalDegenerate(LeafscopeError, ValueError):
    pass


class DegenerateGeometry(LeafscopeError, ValueError):
    pass


# scene / config files


class ParseError(LeafscopeError, ValueError):
    """A scene or config file could not be parsed.

    ``line`` and ``field`` carry whatever location context was available.
    """

    def __init__(self, message, *, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)


class ValidationError(LeafscopeError, ValueError):
    """A parsed value violates a documented invariant."""

    def __init__(self, message, *, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConfigError(LeafscopeError):
    pass


class IoError(LeafscopeError, OSError):
    pass


# isolation / focus / spectral


class EmptyCluster(LeafscopeError, ValueError):
    pass


class NonPositiveDistance(LeafscopeError, ValueError):
    def __init__(self, distance, index=None):
        self.distance = distance
        self.index = index
        at = f" at position {index}" if index is not None else ""
        super().__init__(f"distance must be > 0, got {distance!r}{at}")


class InsufficientSignal(LeafscopeError, ValueError):
    pass


class SaturatedSweep(LeafscopeError, ValueError):
    pass
