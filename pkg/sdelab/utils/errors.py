"""Exception hierarchy shared by every sdelab module."""


class SdelabError(Exception):
    """Base class of all errors raised by sdelab."""


class CoefficientError(SdelabError):
    pass


class EllipticityError(CoefficientError):

    def __init__(self, message, witness=None, eigenvalue=None):
        super(EllipticityError, self).__init__(message)
        self.witness = witness
        self.eigenvalue = eigenvalue


class DegenerateDiffusionError(CoefficientError):

    def __init__(self, message, point=None):
        super(DegenerateDiffusionError, self).__init__(message)
        self.point = point


class DensityError(SdelabError):

    def __init__(self, message, point=None):
        super(DensityError, self).__init__(message)
        self.point = point


class QuadratureError(SdelabError):
    pass


class AssemblyError(SdelabError):

    def __init__(self, message, point=None):
        super(AssemblyError, self).__init__(message)
        self.point = point


class SolverError(SdelabError):

    def __init__(self, message, residual_history=None):
        super(SolverError, self).__init__(message)
        self.residual_history = list(residual_history or [])


class VolumeError(SdelabError):
    pass


class CriterionError(SdelabError):
    pass


class SimulationError(SdelabError):
    pass


class ErgodicError(SimulationError):
    pass


class NotNormalizableError(SdelabError):

    def __init__(self, message, report=None):
        super(NotNormalizableError, self).__init__(message)
        self.report = report


class ConfigError(SdelabError):

    def __init__(self, path, message):
        super(ConfigError, self).__init__('{}: {}'.format(path, message))
        self.path = path
        self.reason = message


class ReportError(SdelabError):
    pass
