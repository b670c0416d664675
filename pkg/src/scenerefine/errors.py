"""Exception types shared across the package."""


class SceneRefineError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInput(SceneRefineError):
    """Geometric input is collinear/coplanar or otherwise rank-deficient."""


class IterationLimit(SceneRefineError):
    """An iterative geometric routine failed to converge; usually a sign of
    pathological geometry."""


class DegenerateRay(SceneRefineError):
    """Object center coincides with the camera origin; viewing ray undefined."""


class NonFiniteCost(SceneRefineError):
    """Cost or gradient evaluation produced NaN/inf, or the cost diverged."""


class InsufficientPairs(SceneRefineError):
    """Not enough usable correspondence pairs for scale estimation."""


class EmptyResult(SceneRefineError):
    """Filtering left too few points for a meaningful estimate."""


class NoConsensus(SceneRefineError):
    """RANSAC failed to find a consensus set above the minimum inlier fraction."""


class ParseError(SceneRefineError):
    """Malformed input file; message carries file/field context."""


class MissingMesh(SceneRefineError):
    """A mesh path referenced by a scene file does not exist."""


class InvalidQuaternion(SceneRefineError):
    """Quaternion in a scene file is non-finite or has (near-)zero norm."""


class BehindCamera(SceneRefineError):
    """A vertex projects behind the camera (z <= 0)."""


class PlacementFailure(SceneRefineError):
    """Synthetic scene generation could not place objects without overlap."""


class IoError(SceneRefineError):
    """Failed to read or write an output file."""


class ReleasedHandle(SceneRefineError):
    """Operation attempted on a released scene handle."""
