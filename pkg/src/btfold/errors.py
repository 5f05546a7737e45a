"""Exception hierarchy shared by every module of the package."""


class BTFoldError(Exception):
    """Base class for all errors raised by the package."""


# integration
class Divergence(BTFoldError):
    """State norm exceeded the configured divergence bound."""

    def __init__(self, message, t=None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


class StepUnderflow(BTFoldError):
    """Step size fell below what the floating point grid can resolve."""


class Timeout(BTFoldError):
    """Integration span exceeded ``max_time``."""


class NoEvent(Timeout):
    """No sign change of the event function before ``max_time``."""


class NonFinite(BTFoldError):
    """A vector field evaluation produced NaN or infinity."""


# root finding and continuation
class NewtonDivergence(BTFoldError):
    """Newton iteration failed to converge."""


class SingularJacobian(BTFoldError):
    """Jacobian is numerically singular where it must be invertible."""


class NoFoldInBracket(BTFoldError):
    """The determinant of the fast Jacobian keeps its sign on the bracket."""


class NotBTFold(BTFoldError):
    """Fold point lacks the double zero eigenvalue."""


class NoDeparture(BTFoldError):
    """No outgoing direction of the frozen flow was found near a cusp."""


class SignChange(BTFoldError):
    """Reduced slow flow changes sign along a branch."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values


# Painleve engine
class OutOfValidity(BTFoldError):
    """Truncated asymptotic series requested outside its validity region."""


class BranchViolation(BTFoldError):
    """Point is not on the branch where the pole regularization is real."""


class PoleAt(BTFoldError):
    """Requested the original coordinates exactly at a pole."""


class NoPoleFound(BTFoldError):
    """Regularized coordinate did not cross zero within the horizon."""


# blow-up charts
class OutOfChart(BTFoldError):
    """Point is outside the half-space covered by a chart."""


class OutOfOverlap(BTFoldError):
    """Point is outside the overlap domain of two charts."""


# return maps
class NoReturn(BTFoldError):
    """Orbit did not come back to the section."""


class ConfigError(BTFoldError):
    """Malformed experiment configuration."""
