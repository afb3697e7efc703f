"""
Exception hierarchy shared by the library and the command line
"""

from typing import Optional


class FloquetError(Exception):
    """Base class for every error raised by the package"""

    exit_code = 2


class ConfigError(FloquetError):
    """Malformed or invalid run configuration"""

    exit_code = 1

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class NumericError(FloquetError):
    exit_code = 2


class IntegrationError(NumericError):
    def __init__(self, t: float, message: str = "non-finite value during integration"):
        self.t = t
        super().__init__(f"{message} at grid time t={t:.17g}")


class ConditioningError(NumericError):
    def __init__(self, s: float, condition: float):
        self.s = s
        self.condition = condition
        super().__init__(f"g({s:.17g}) is numerically singular (condition estimate {condition:.3e})")


class DiagnosticsError(NumericError):
    pass


class EscapedRegionError(NumericError):
    def __init__(self, step: int, norm: float):
        self.step = step
        self.norm = norm
        super().__init__(f"orbit left the ball fiber at step {step} (|x| = {norm:.6g})")


class EvaluationError(NumericError):
    pass


class FlowError(NumericError):
    pass


class ChainError(FloquetError):
    exit_code = 2

    def __init__(self, message: str, step: Optional[int] = None,
                 residual: Optional[float] = None, bound: Optional[float] = None):
        self.step = step
        self.residual = residual
        self.bound = bound
        details = []
        if step is not None:
            details.append(f"step {step}")
        if residual is not None and bound is not None:
            details.append(f"residual {residual:.6e} vs bound {bound:.6e}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class ChainPreconditionError(ChainError):
    pass


class ChainConstructionError(ChainError):
    pass


class CaseSelectionError(ChainError):
    pass
