"""
Exception hierarchy shared by the analytic model, the simulator and the harness
"""


class SpsError(Exception):
    """Base class for every error raised by this project"""


class AnalyticDomainError(SpsError, ValueError):
    """An argument lies outside the domain of an analytic formula"""


class ModelValidityError(SpsError, ValueError):
    """The analytic model is undefined for these parameters"""


class SolverError(SpsError, RuntimeError):
    """The fixed-point solver did not reach its tolerance"""

    def __init__(self, message, last_iterate, residual):
        super().__init__(f"{message} (last iterate {last_iterate!r}, residual {residual!r})")
        self.last_iterate = last_iterate
        self.residual = residual


class InfiniteDelayError(SpsError, ArithmeticError):
    """Combined collision probability reached 1, so the expected delay diverges"""


class ConfigError(SpsError, ValueError):
    """Invalid scenario or sweep configuration"""


class ConfigParseError(ConfigError):
    """The configuration text could not be parsed"""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.line = line
        self.key = key


class ConfigValidationError(ConfigError):
    """One or more configuration invariants are violated"""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.issues))


class OutputError(SpsError, OSError):
    """Writing a result artifact failed"""

    def __init__(self, path, reason):
        super().__init__(f"cannot write '{path}': {reason}")
        self.path = path
