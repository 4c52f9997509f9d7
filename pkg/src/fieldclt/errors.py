"""Exception types shared across the package."""


class FieldCLTError(Exception):
    """Base class for all errors raised by fieldclt."""


class UnsupportedDerivativeOrder(FieldCLTError, ValueError):
    pass


class UnsupportedDimension(FieldCLTError, ValueError):
    pass


class GridTooLarge(FieldCLTError, MemoryError):
    pass


class CubeOutOfExtent(FieldCLTError, IndexError):
    pass


class DomainNotCovered(FieldCLTError, ValueError):
    pass


class MissingDerivatives(FieldCLTError, KeyError):
    pass


class GridMismatch(FieldCLTError, ValueError):
    pass


class WindowTooSmall(FieldCLTError, ValueError):
    pass


class NonSymmetricInput(FieldCLTError, ValueError):
    pass


class SingularConditioningBlock(FieldCLTError, ArithmeticError):
    pass


class OutsideRegionD(FieldCLTError, ValueError):
    pass


class ConfigError(FieldCLTError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
