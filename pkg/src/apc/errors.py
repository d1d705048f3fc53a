"""Exception types shared across the toolkit."""


class ApcError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(ApcError):
    pass


class NotSymmetric(ApcError):
    pass


class NotPositiveDefinite(ApcError):
    pass


class UnsupportedFormat(ApcError):
    pass


class MalformedEntry(ApcError):
    pass


class IndexOutOfBounds(ApcError):
    pass


class InvalidDimensions(ApcError):
    pass


class IndivisibleRows(ApcError):
    pass


class RankDeficientBlock(ApcError):
    def __init__(self, block_index, msg=None):
        self.block_index = block_index
        super().__init__(msg or f"block {block_index} is rank deficient")


class DegenerateSpectrum(ApcError):
    pass


class TuningFailed(ApcError):
    pass


class Diverged(ApcError):
    def __init__(self, msg, trace=None):
        self.trace = trace
        super().__init__(msg)


class TooLarge(ApcError):
    pass


class VerificationFailed(ApcError):
    def __init__(self, msg, report=None):
        self.report = report
        super().__init__(msg)


class InsufficientData(ApcError):
    pass


class NumericallySingular(ApcError):
    """Raised by the dense eliminators when a pivot collapses."""
