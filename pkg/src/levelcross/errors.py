"""Exception hierarchy."""


class LevelCrossError(Exception):
    """Base class for all errors raised by this package."""


class RangeError(LevelCrossError, ValueError):
    """A time lies outside the domain of a tabulated pulse."""


class DegeneracyError(LevelCrossError, ValueError):
    """Delta and Omega both vanish, so no dressed basis is defined."""


class DomainError(LevelCrossError, ValueError):
    """An operation was asked to integrate across a crossing."""


class ClassificationError(LevelCrossError):
    """The local power-law behaviour of a pulse could not be determined."""


class PreconditionError(LevelCrossError, ValueError):
    """An analysis precondition (e.g. odd detuning) does not hold."""


class StiffnessError(LevelCrossError):
    """The integrator could not meet its tolerance at the minimum step."""


class ConfigError(LevelCrossError, ValueError):
    """An experiment configuration is malformed.

    ``field`` names the offending entry using a dotted path.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
