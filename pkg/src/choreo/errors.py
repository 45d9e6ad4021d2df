"""Exception hierarchy shared by the registry, controller and engines."""


class ChoreoError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class OntologyParseError(ChoreoError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CycleError(ChoreoError):
    def __init__(self, cls: str):
        super().__init__(f"subclass cycle through {cls}")
        self.cls = cls


class OsrSyntaxError(ChoreoError):
    def __init__(self, position: int, message: str):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class ValidationError(ChoreoError):
    """A description violates an invariant; ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnsupportedProtocolError(ValidationError):
    pass


class DuplicateError(ChoreoError):
    pass


class NotFoundError(ChoreoError):
    pass


class SnapshotError(ChoreoError):
    pass


class ConfigurationError(ChoreoError):
    pass


class EngineError(ChoreoError):
    """Engine rejected a descriptor or an input."""


class UndeclaredSourceError(EngineError):
    pass


class TransportError(ChoreoError):
    pass


class ControllerStopped(ChoreoError):
    pass
