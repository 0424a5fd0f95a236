"""Exception hierarchy shared by the team and LQG modules."""


class TeamsubError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(TeamsubError, ValueError):
    pass


class DimensionMismatch(TeamsubError, ValueError):
    pass


class InvalidCovariance(TeamsubError, ValueError):
    pass


class BadIndex(TeamsubError, IndexError):
    pass


class ParseError(TeamsubError, ValueError):
    """A problem, strategy or override file could not be read."""


class AssumptionViolated(TeamsubError):
    """A structural assumption (substitutability, solvability) does not hold.

    ``details`` carries machine-readable context such as the failing pair.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class InvarianceBroken(TeamsubError):
    """A quantity that must be preserved drifted beyond tolerance."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class InternalError(TeamsubError, RuntimeError):
    pass


class InfoViolation(TeamsubError):
    """A strategy reads an information block its member does not have."""


class NothingToDo(TeamsubError):
    pass


class BadCertificate(TeamsubError):
    pass


class SingularInnovation(TeamsubError, ArithmeticError):
    pass
