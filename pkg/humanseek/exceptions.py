__all__ = [
    "HumanSeekException",
    "MapFormatError",
    "SentenceSourceError",
    "SentenceCountError",
    "UnknownKeywordError",
    "GridMismatchError",
    "KernelSolveError",
    "PlanningError",
    "DemonstrationFormatError",
    "ConfigError",
    "EpisodeError",
    "ExplorationExhausted",
    "MetricsError",
]


class HumanSeekException(Exception):
    pass


class MapFormatError(HumanSeekException):
    pass


class SentenceSourceError(HumanSeekException):
    """Raised when a sentence source cannot produce sentences. The prompt is kept for offline replay."""

    def __init__(self, message: str, prompt: str = ""):
        super(SentenceSourceError, self).__init__(message)
        self.prompt = prompt


class SentenceCountError(HumanSeekException):
    def __init__(self, expected: int, found: int):
        super(SentenceCountError, self).__init__(f"expected {expected}, found {found}")
        self.expected = expected
        self.found = found


class UnknownKeywordError(HumanSeekException):
    pass


class GridMismatchError(HumanSeekException):
    pass


class KernelSolveError(HumanSeekException):
    def __init__(self, message: str, index=None):
        super(KernelSolveError, self).__init__(message)
        self.index = index


class PlanningError(HumanSeekException):
    pass


class DemonstrationFormatError(HumanSeekException):
    def __init__(self, message: str, line: int = 0):
        super(DemonstrationFormatError, self).__init__(f"line {line}: {message}" if line else message)
        self.line = line


class ConfigError(HumanSeekException):
    pass


class EpisodeError(HumanSeekException):
    pass


class ExplorationExhausted(EpisodeError):
    """Every label has been visited or is unreachable."""


class MetricsError(HumanSeekException):
    """An episode result cannot enter the metrics, e.g. its shortest path is not a finite distance."""
