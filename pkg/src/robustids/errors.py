"""Shared exception types, mapped to CLI exit codes in robustids.cli."""


class DataFormatError(ValueError):
    """Malformed input data or a corrupt persisted artifact."""


class MissingArtifactError(FileNotFoundError):
    """A pipeline stage needs an artifact another command has not produced yet."""

    def __init__(self, what, producer):
        super().__init__(f"{what} not found; run `{producer}` first")
        self.producer = producer
