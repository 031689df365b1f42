"""Exception hierarchy shared by every module."""


class GPTError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(GPTError, ValueError):
    pass


class BackendMismatch(GPTError, TypeError):
    pass


class Singular(GPTError, ArithmeticError):
    """A matrix that had to be inverted is not invertible."""


class NonGenerating(GPTError, ValueError):
    """Generators do not span the ambient space."""


class Degenerate(GPTError, ValueError):
    """Zero generator, or a cone that is not pointed."""


class UnitNotOne(GPTError, ValueError):
    pass


class NotPointed(Degenerate):
    pass


class NotGenerating(NonGenerating):
    pass


class NotInCone(GPTError, ValueError):
    pass


class NotPositive(GPTError, ValueError):
    pass


class NotConclusive(GPTError, ValueError):
    pass


class RangeMismatch(GPTError, ValueError):
    pass


class NotAChannel(GPTError, ValueError):
    pass


class NotEquivariant(GPTError, ValueError):
    pass


class NotTransitive(GPTError, ValueError):
    pass


class UnsupportedModel(GPTError, ValueError):
    pass


class UnknownModel(GPTError, KeyError):
    pass
