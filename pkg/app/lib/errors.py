"""
Exception hierarchy shared by the library, services and CLI
"""

from typing import Optional


class ContactSenseError(Exception):
    """Base class for every error raised by this package"""


class InvalidParameterError(ContactSenseError, ValueError):
    """A value violates the documented domain of an argument or type field"""


class InsufficientPointsError(InvalidParameterError):
    """Clustering was asked for more centers than there are contacts"""


class OracleSizeError(InvalidParameterError):
    """The enumeration oracle refuses instances larger than it can enumerate"""


class NoSlideError(InvalidParameterError):
    """The incline is too shallow for the box to slide (tan(theta) <= mu_k)"""


class ScalingSolverError(ContactSenseError):
    """The active-set iteration did not terminate"""


class SimulationDivergedError(ContactSenseError):
    """Raised by a dynamics step whose resulting state is unusable"""

    def __init__(self, step: int, reason: str):
        super().__init__(f"simulation diverged at step {step}: {reason}")
        self.step = step
        self.reason = reason


class ConfigError(ContactSenseError):
    """A scene config or override could not be resolved"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
