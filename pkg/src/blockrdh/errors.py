"""Exception types shared across the package."""


class BlockRdhError(Exception):
    """Base class for all library errors."""


# --- image I/O ---

class MalformedHeader(BlockRdhError):
    pass


class SampleOutOfRange(BlockRdhError):
    pass


class TruncatedData(BlockRdhError):
    pass


class IoFailure(BlockRdhError):
    pass


class ShapeMismatch(BlockRdhError):
    pass


# --- bit codec ---

class FieldOutOfRange(BlockRdhError):
    pass


class BadLength(BlockRdhError):
    pass


class InputTooLong(BlockRdhError):
    pass


class CorruptStream(BlockRdhError):
    pass


# --- predictors / histogram shifting ---

class ContextUnavailable(BlockRdhError):
    pass


class NoCapacity(BlockRdhError):
    pass


class RangeViolation(BlockRdhError):
    pass


class InconsistentState(BlockRdhError):
    pass


# --- pipeline ---

class ImageTooSmall(BlockRdhError):
    pass


class PayloadTooLarge(BlockRdhError):
    pass


class BadMagic(BlockRdhError):
    pass
