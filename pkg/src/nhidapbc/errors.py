"""Exception types shared across the package."""


class ModelError(RuntimeError):
    """A mechanical model violates a rank or definiteness assumption."""


class ControlError(RuntimeError):
    """The control law cannot be evaluated (e.g. input matrix lost rank)."""


class CollisionError(RuntimeError):
    """Two bodies closer than the hard minimum separation; state is unphysical."""


class NumericalFailure(RuntimeError):
    """Integration produced non-finite state."""


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate.

    ``field`` carries the path of the offending entry, e.g. ``agents[1].q0``.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)
