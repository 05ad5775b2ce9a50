class MarkovCLTError(Exception):
    """Base class for errors raised by this package."""


class ChainValidationError(MarkovCLTError, ValueError):
    """The supplied chain does not satisfy the model invariants."""


class NonStochasticKernel(ChainValidationError):
    pass


class NoUniqueStationaryLaw(ChainValidationError):
    pass


class ZeroMassState(ChainValidationError):
    pass


class SpecFormatError(ChainValidationError):
    """Malformed chain-spec file (bad JSON, NaN/Inf, ragged rows, ...)."""


class HorizonExceeded(MarkovCLTError, ValueError):
    pass


class SingularSystem(MarkovCLTError, ArithmeticError):
    pass


class TooFewTerms(MarkovCLTError, ValueError):
    pass


class NotTotallyErgodic(MarkovCLTError):
    pass


class ResourceCapExceeded(MarkovCLTError):
    pass
