"""Exception hierarchy shared across the package."""


class EbicGlmError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedPair(EbicGlmError):
    """Requested family/link combination has no coded composite function."""


class DomainError(EbicGlmError):
    """Argument outside the admissible range of a link or family."""


class DataError(EbicGlmError):
    """Input data violates a structural requirement (shape, finiteness, coding)."""


class RankDeficient(EbicGlmError):
    """Design matrix of the candidate model is not of full column rank."""


class InvalidArgs(EbicGlmError):
    """Arguments violate a documented precondition."""


class EmptyCandidates(EbicGlmError):
    """Forward selection was started with no candidate features."""


class PathEmpty(EbicGlmError):
    """No candidate produced a usable fit at the first forward-selection step."""


class InvalidRho(EbicGlmError):
    """Equicorrelation parameter outside [0, 1)."""


class InvalidDesign(EbicGlmError):
    """Simulation design parameters are internally inconsistent."""


class FoldTooSmall(EbicGlmError):
    """Cross-validation folds are too small to fit any model."""
