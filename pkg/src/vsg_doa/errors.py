"""Exception hierarchy shared by the analysis modules and the CLI."""


class AnalysisError(Exception):
    """An analysis could not produce a result for the given operating point.

    The CLI maps these to exit status 2.
    """


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
