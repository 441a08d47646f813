"""Exception classes raised across the package.

Every error derives from :class:`HtccaError`, and most also derive from
``ValueError`` so callers that only care about "bad input" can catch that.
"""


class HtccaError(Exception):
    """Base class for all package errors."""


# numerics
class LengthMismatch(HtccaError, ValueError):
    pass


class ZeroVariance(HtccaError, ValueError):
    """A series (usually a spatially filtered projection) is constant."""


class RankDeficient(HtccaError, ValueError):
    """Covariance whitening failed; retry with ``ridge > 0``."""


# reference signals
class NyquistViolation(HtccaError, ValueError):
    pass


class EmptyFrequencyList(HtccaError, ValueError):
    pass


# templates / classifiers
class ShapeMismatch(HtccaError, ValueError):
    pass


class EmptyList(HtccaError, ValueError):
    pass


class SingleSubjectDataset(HtccaError, ValueError):
    pass


class IndexOutOfRange(HtccaError, IndexError):
    pass


class TooFewTrials(HtccaError, ValueError):
    pass


class OutOfRange(HtccaError, ValueError):
    pass


# simulator / evaluation
class ConfigInvalid(HtccaError, ValueError):
    pass


class TooFewBlocks(HtccaError, ValueError):
    pass


class DegenerateDifferences(HtccaError, ValueError):
    """All paired differences are zero, so no t statistic exists."""


# dataset io
class ManifestMalformed(HtccaError, ValueError):
    pass


class SizeMismatch(HtccaError, ValueError):
    """Tensor file length disagrees with the manifest extents."""


class UnsupportedVersion(HtccaError, ValueError):
    pass


class WindowOutOfRange(HtccaError, ValueError):
    pass


class UnknownChannel(HtccaError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonIntegerFactor(HtccaError, ValueError):
    pass
