"""Exception hierarchy shared by all swsim modules."""


class SwsError(Exception):
    """Base class for every error raised by swsim."""


class InvalidTensor(SwsError, ValueError):
    pass


class InvalidConfig(SwsError, ValueError):
    pass


class InvalidCode(SwsError, ValueError):
    pass


class ShapeError(SwsError, ValueError):
    pass


class NumericalError(SwsError, ArithmeticError):
    pass


class ModelError(SwsError, LookupError):
    pass


class AccountingError(SwsError, ValueError):
    pass


class CompareError(SwsError, ValueError):
    pass


class FormatError(SwsError, ValueError):
    pass


class Unsupported(FormatError):
    pass


class ConfigError(SwsError, ValueError):
    pass
