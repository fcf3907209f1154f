"""Exception hierarchy shared by all modules."""


class MipnnError(Exception):
    """Base class for every error raised by the library."""


class InputError(MipnnError, ValueError):
    """Invalid arguments or data handed to an operation."""


class ConfigError(InputError):
    """Invalid experiment or command-line configuration."""


class BuildError(MipnnError):
    """A MIP model could not be built or transformed."""


class UnsupportedModelError(MipnnError):
    """The built-in solver cannot handle the given model."""


class SolverError(MipnnError):
    """An external solver failed or produced no usable result."""


class ParseError(MipnnError):
    """A file could not be parsed.  Carries the offending location."""

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
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class NetworkFormatError(ParseError):
    """A network file is malformed or violates the network invariants."""


class DecodeError(MipnnError):
    """A solver assignment does not describe a valid integer network."""
