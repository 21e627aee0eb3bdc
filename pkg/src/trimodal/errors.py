"""
Exception types raised across the package.

Input validation still raises plain :class:`ValueError` where nothing more
specific is useful; the classes here exist for failures a caller (mostly the
CLI) needs to tell apart.
"""

__all__ = [
    "DatasetBuildError",
    "DatasetMismatchError",
    "NonFiniteLossError",
    "OffParseError",
    "TrimodalError",
]


class TrimodalError(Exception):
    """
    Base class for runtime failures the CLI maps to exit code 1.
    """


class OffParseError(TrimodalError, ValueError):
    """
    Malformed OFF mesh text.

    :param message: What went wrong.
    :param line_number: 1-indexed line of the offending input, or None when
        the problem is the end of the file.
    """

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")


class DatasetBuildError(TrimodalError):
    """
    Raised when a dataset build produced zero objects.
    """


class DatasetMismatchError(TrimodalError):
    """
    Raised when a dataset archive, a config and a checkpoint disagree.
    """


class NonFiniteLossError(TrimodalError):
    """
    A training step produced a NaN or infinite loss.

    :param iteration: Iteration at which the loss blew up.
    :param object_ids: Ids of the objects in the offending batch.
    :param components: The loss components as floats (may contain nan/inf).
    """

    def __init__(self, iteration: int, object_ids: list[str], components: dict[str, float]):
        self.iteration = iteration
        self.object_ids = object_ids
        self.components = components
        super().__init__(
            f"non-finite loss at iteration {iteration}: {components} "
            f"(batch: {', '.join(object_ids)})"
        )
