"""Exception hierarchy shared by all modules."""


class FDBlowupError(Exception):
    pass


class ParameterError(FDBlowupError, ValueError):
    pass


class DomainError(FDBlowupError, ValueError):
    pass


class DiscretizationError(FDBlowupError, ValueError):
    pass


class ShapeError(FDBlowupError, ValueError):
    pass


class DiagnosticError(FDBlowupError, ValueError):
    pass


class ConfigError(FDBlowupError, ValueError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SolverError(FDBlowupError, RuntimeError):
    def __init__(self, message, last_residual=float("nan")):
        self.last_residual = last_residual
        super().__init__(f"{message} (last residual {last_residual:.3e})")


class PositivityError(SolverError):
    pass
