"""Exception hierarchy shared by every module."""


class CurvlabError(Exception):
    """Base class for all engine errors."""


class ExprSyntaxError(CurvlabError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}" + (f" in {source!r}" if source else ""))


class ExprDomainError(CurvlabError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"{message} in sub-expression '{subexpr}'")


class GeometryError(CurvlabError):
    """Singular metric, degenerate plane, rank deficiency, point outside the chart."""


class ConfigError(CurvlabError):
    """Malformed or inconsistent run configuration."""
