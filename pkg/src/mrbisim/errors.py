"""Exception hierarchy shared across the package."""


class MrbisimError(Exception):
    """Base class for all errors raised by mrbisim."""


class ConfigError(MrbisimError):
    """Malformed or invalid configuration."""


class ExpressionError(ConfigError):
    """Flow or resolution expression could not be parsed."""


class SpecError(ConfigError):
    """Resolution specification is not strictly positive."""


class EvaluationError(MrbisimError):
    """Flow evaluation produced a non-finite value."""


class GeometryError(MrbisimError):
    pass


class AnchorNotInteriorError(GeometryError):
    pass


class UnsupportedDimensionError(GeometryError):
    pass


class EmptyPolytopeError(GeometryError):
    pass


class SplitError(GeometryError):
    pass


class SolverError(MrbisimError):
    """LP core failed numerically (cycling, iteration limit)."""


class ClusteringError(MrbisimError):
    pass


class DomainError(MrbisimError):
    """A point lies outside the domain box."""


class DomainEscapeError(DomainError):
    def __init__(self, state: int, image):
        super().__init__(f"image of anchor {state} leaves the domain: {list(image)}")
        self.state = state
        self.image = image


class SchedulingError(MrbisimError):
    """A subproblem was scheduled before its predecessors were solved."""
