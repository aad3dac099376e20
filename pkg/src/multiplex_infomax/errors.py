"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class NonFiniteError(ArithmeticError):
    """A value left the finite float64 domain (NaN or Inf)."""


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class DegenerateDegreeError(ValueError):
    """Adjacency normalization hit a zero row sum (isolated node, no self weight)."""


class NetworkFormatError(ValueError):
    """A network directory or one of its files is malformed."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


class DivergenceError(RuntimeError):
    """Training produced a non-finite or runaway objective."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
