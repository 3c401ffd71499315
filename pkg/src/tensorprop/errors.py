"""Exception hierarchy shared by every tensorprop module."""


class TensorPropError(Exception):
    """Base class for all errors raised by tensorprop."""


class BoundsError(TensorPropError, IndexError):
    """A coordinate falls outside the tensor shape."""

    def __init__(self, mode, index, extent):
        self.mode = mode
        self.index = index
        self.extent = extent
        super().__init__(
            f"index {index} out of bounds for mode {mode} with extent {extent}"
        )


class ShapeError(TensorPropError, ValueError):
    """Array or coordinate dimensions do not agree."""


class ConfigError(TensorPropError, ValueError):
    """Invalid configuration value or combination of values."""


class DatasetError(TensorPropError, ValueError):
    """A dataset could not be read or produced no usable records."""


class StateError(TensorPropError, RuntimeError):
    """An object was used before it was ready (or after it went stale)."""


class DivergenceError(TensorPropError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, learning_rate):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning_rate={learning_rate:g})"
        )


class ParseError(TensorPropError, ValueError):
    """A chemical formula could not be parsed.

    ``offset`` is the byte offset into the UTF-8 encoded formula where
    parsing failed.
    """

    def __init__(self, message, formula, offset):
        self.formula = formula
        self.offset = offset
        super().__init__(f"{message} at offset {offset} in {formula!r}")
