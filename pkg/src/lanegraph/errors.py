"""Exception hierarchy shared across the package."""


class LaneGraphError(Exception):
    """Base class for all package errors."""


class InvalidPolylineError(LaneGraphError, ValueError):
    pass


class GraphIntegrityError(LaneGraphError, ValueError):
    pass


class ShapeError(LaneGraphError, ValueError):
    pass


class ContractError(LaneGraphError, ValueError):
    pass


class ConfigError(LaneGraphError, ValueError):
    pass


class SceneParseError(LaneGraphError, ValueError):
    pass


class CheckpointVersionError(LaneGraphError):
    pass


class NumericalError(LaneGraphError, FloatingPointError):
    pass
