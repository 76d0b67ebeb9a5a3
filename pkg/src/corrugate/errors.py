"""Exception hierarchy.

Each exception carries an ``exit_code`` used by the command-line front end:
2 for domain preconditions, 3 for configuration errors, 5 for internal oracle
inconsistencies.
"""


class CorrugateError(Exception):
    exit_code = 3


class ConfigError(CorrugateError, ValueError):
    """Malformed or incomplete configuration."""

    exit_code = 3


class UnknownCatalogEntry(ConfigError):
    pass


class MissingParameter(ConfigError):
    pass


class OrderUnsupported(CorrugateError, ValueError):
    pass


class OutOfDomain(CorrugateError, ValueError):
    exit_code = 2


class DomainError(CorrugateError, ValueError):
    """A mathematical precondition of the construction is violated."""

    exit_code = 2


class CurvatureVanishes(DomainError):
    pass


class NonOrthogonalSeed(DomainError):
    pass


class IrregularCurve(DomainError):
    pass


class NotShortAt(DomainError):
    def __init__(self, u, deficit):
        self.u = float(u)
        self.deficit = float(deficit)
        super().__init__(
            f"metric is below the squared speed at u={self.u:.17g} "
            f"(g - |f0'|^2 = {self.deficit:.3e})")


class NotShort(DomainError):
    def __init__(self, u, margin):
        self.u = float(u)
        self.margin = float(margin)
        super().__init__(
            f"curve is not strictly short: sqrt(g) - |f0'| = {self.margin:.6g} "
            f"at u={self.u:.17g}")


class AmplitudeDegenerate(DomainError):
    pass


class FrameNodesMissing(DomainError):
    pass


class LengthMismatch(ConfigError):
    pass


class OutOfOrder(DomainError):
    pass


class NotPSD(CorrugateError, ArithmeticError):
    exit_code = 5


class ResourceBudgetExceeded(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


class TooFewSamples(ConfigError):
    pass


class InsufficientPoints(ConfigError):
    pass


class NonPositiveValue(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass
