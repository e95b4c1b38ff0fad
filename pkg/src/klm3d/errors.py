"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class Klm3dError(Exception):
    exit_code = 3


class ParseError(Klm3dError):
    exit_code = 2


class SchemaError(Klm3dError):
    exit_code = 2


class MissingCoefficients(Klm3dError):
    exit_code = 2


class DegenerateGeometry(Klm3dError, ValueError):
    pass


class InvalidWidth(Klm3dError, ValueError):
    pass


class InvalidLayout(Klm3dError, ValueError):
    pass


class EmptyScenario(Klm3dError):
    pass


class InsufficientData(Klm3dError):
    pass


class ZeroVariance(Klm3dError):
    pass


class DegenerateRegression(Klm3dError):
    pass


class InsufficientModalities(Klm3dError):
    pass


class JoinError(Klm3dError):
    def __init__(self, message, unmatched=()):
        super().__init__(message)
        self.unmatched = list(unmatched)
