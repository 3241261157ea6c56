"""Exception types raised across the package."""


class VpecgError(Exception):
    """Base class for all package-specific errors."""


class BoundsViolation(VpecgError):
    """A nonlinear parameter lies outside its configured box bounds."""


class KnotCollision(VpecgError):
    """Baseline knot ordering x1 < x2 < x3 < x4 failed."""


class InfeasibleInit(VpecgError):
    """Optimizer starting point is outside bounds or not evaluable."""


class TooFewPeaks(VpecgError):
    """Fewer than two R peaks; no beat can be sliced."""


class EmptyInput(VpecgError):
    """An operation received an empty collection."""


class NoSignificantExtrema(VpecgError):
    """No derivative extremum survived the significance threshold."""


class BoundNotFound(VpecgError):
    """Neither onset/end candidate exists for a wave boundary."""


class DegenerateInput(VpecgError):
    """Metric input has zero variance / zero energy."""


class EmptyWindow(VpecgError):
    """ST window selects no samples."""


class NoMatchingBeats(VpecgError):
    """No automatic beat could be matched to any annotated beat."""


class TooFewAnchors(VpecgError):
    """Not enough baseline anchors for the spline comparator."""


class ZeroNoise(VpecgError):
    """Noise vector has zero power; SNR scaling undefined."""


class ParseError(VpecgError):
    """Malformed input file; message carries the offending location."""


class NonUniformSampling(VpecgError):
    """Record time axis jitter exceeds tolerance."""


class RankDeficientWarning(UserWarning):
    """Dictionary matrix was numerically rank deficient; solution truncated."""
