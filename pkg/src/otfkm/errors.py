"""Exception hierarchy shared by all verification modules."""


class OtfkmError(Exception):
    """Base class for every error raised by this package."""


class InvalidVariant(OtfkmError):
    pass


class NotUnitCoefficients(OtfkmError):
    pass


class DegenerateFoliation(OtfkmError):
    """The system has m2 = l - m - 1 <= 0, so no quartic foliation exists."""


class InvalidManifold(OtfkmError):
    pass


class ConvergenceFailure(OtfkmError):
    pass


class RankDeficiency(OtfkmError):
    pass


class ProjectionFailure(OtfkmError):
    pass


class NotOnFocalManifold(OtfkmError):
    pass


class NotOnSource(OtfkmError):
    pass


class FocalAngle(OtfkmError):
    pass


class FocalLevel(OtfkmError):
    pass


class ExtensionUnavailable(OtfkmError):
    pass


class Disconnected(OtfkmError):
    pass


class Infeasible(OtfkmError):
    pass


class WrongVariant(OtfkmError):
    pass


class ConfigError(OtfkmError):
    pass
