"""Exception hierarchy. The CLI maps each family to an exit code."""


class DscError(Exception):
    exit_code = 1


class ModelError(DscError, ValueError):
    """Inconsistent or invalid model input."""


class DimensionError(ModelError):
    pass


class NotPSDError(ModelError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularMatrixError(ModelError):
    def __init__(self, message, rcond=None):
        if rcond is not None:
            message = f"{message} (rcond={rcond:.3e})"
        super().__init__(message)
        self.rcond = rcond


class NumericalMismatchError(ModelError):
    """Two independent computations of the same quantity disagree."""


class ConfigError(ModelError):
    pass


class InfeasibleDistortionError(DscError):
    exit_code = 2

    def __init__(self, message, validity=None, node_id=None):
        super().__init__(message)
        self.validity = validity
        self.node_id = node_id


class MonteCarloMismatch(DscError):
    exit_code = 3
