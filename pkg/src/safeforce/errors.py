"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violated a documented precondition (shape, range, definiteness)."""


class ConfigError(ValueError):
    """A scenario or robot description could not be parsed or validated.

    ``path`` is the dotted field path of the offending entry (``""`` when the
    document itself is malformed) and ``line`` the 1-based source line if known.
    """

    def __init__(self, path, message, line=None):
        self.path = path
        self.message = message
        self.line = line
        where = path or "<document>"
        if line is not None:
            where = f"{where} (line {line})"
        super().__init__(f"{where}: {message}")
