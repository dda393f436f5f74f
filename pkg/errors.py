# errors.py

class QztError(Exception):
    """Base class for every failure raised by this package."""


class ConfigError(QztError):
    """Malformed config: unknown keys, missing units, bad values."""


class NumericalError(QztError):
    """A numerical method failed to reach its tolerance."""


class QuadratureError(NumericalError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class IntegrationError(NumericalError):
    """ODE integration did not succeed."""


class StrongCouplingError(NumericalError):
    """Second-order perturbation theory is outside its range of validity."""


class ScheduleError(QztError, ValueError):
    """Measurement schedule violates ordering or duration constraints."""


class DomainError(QztError, ValueError):
    """Argument outside the mathematical domain of an operation."""


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericalError):
        return 3
    if isinstance(exc, QztError):
        return 2
    return 1
