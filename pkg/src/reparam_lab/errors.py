"""Exception hierarchy shared by the simulation, bound and reporting layers."""


class ReparamLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(ReparamLabError, ValueError):
    """Bad dimensions, unknown enum values, or an invalid experiment config."""

    def __init__(self, message, field_path=None):
        super().__init__(message if field_path is None else f"{field_path}: {message}")
        self.field_path = field_path


class NumericalDivergenceError(ReparamLabError, FloatingPointError):
    """A rollout produced a non-finite state."""

    def __init__(self, step, episode=None, detail=""):
        where = f"step t={step}" if episode is None else f"episode {episode}, step t={step}"
        msg = f"non-finite state at {where}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.step = step
        self.episode = episode


class InvalidModelError(ReparamLabError, ValueError):
    """A discrete transition row or probability vector is unusable."""


class DistractorError(ReparamLabError, ValueError):
    """A transpose function produced a non-finite observation."""


class InsufficientDiversityError(ReparamLabError, ValueError):
    """Every bootstrap pair in a slope estimate was a near-duplicate."""


class BoundInputError(ReparamLabError, ValueError):
    """Inputs to a closed-form bound violate its preconditions."""
