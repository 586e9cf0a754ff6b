"""Exception hierarchy for geometric degeneracies.

Every error below signals a precondition failure of a well-defined geometric
operation, never a numerical repair: callers are expected to catch, count and
skip degenerate samples explicitly.
"""


class GeometryError(Exception):
    """Base class for all geometric-degeneracy errors."""


class NonRegular(GeometryError):
    """Curve speed is (numerically) zero; the Frenet frame is undefined."""


class ZeroCurvature(GeometryError):
    """Curvature is (numerically) zero; N, B, torsion and K̇ are undefined.

    Carries the quantities that are still well defined so callers can store
    straight-line samples: attributes ``G`` and ``T`` (and ``g``/``t`` for
    image curves) are set when available.
    """

    def __init__(self, msg, **partial):
        super().__init__(msg)
        for name, value in partial.items():
            setattr(self, name, value)


class BehindCamera(GeometryError):
    """Point has non-positive depth; perspective projection undefined."""


class SingularIntrinsics(GeometryError):
    """Intrinsic matrix is not invertible."""


class TangentAlongRay(GeometryError):
    """Space tangent aligned with the visual ray: image speed vanishes."""


class StationaryImagePoint(GeometryError):
    """Image speed is zero; image curvature quantities undefined."""


class NonCoplanarRays(GeometryError):
    """Two-view rays are skew beyond tolerance: not a valid correspondence."""


class ParallelRays(GeometryError):
    """Two-view rays are parallel; triangulation is singular."""


class NegativeDepth(GeometryError):
    """Triangulated point lies behind a camera."""


class EpipolarTangency(GeometryError):
    """Image tangent lies in the epipolar plane; tangent reconstruction degenerate."""


class InconsistentSign(GeometryError):
    """The two tangent-orientation conditions disagree: inconsistent measurements."""


class IllConditionedSystem(GeometryError):
    """3x3 reconstruction system condition number exceeds the safe bound."""


class NonSkew(GeometryError):
    """dR/dt Rᵀ has a symmetric part beyond tolerance: R is not a rigid rotation."""


class FlatSurfacePoint(GeometryError):
    """Normal curvature along the ray is zero; contour-generator slip undefined."""


class EpipolarDegenerate(GeometryError):
    """Epipolar line tangent to the image curve; alpha-from-beta undefined."""


class DegenerateLookAt(GeometryError):
    """View direction parallel to the up vector; camera frame undefined."""


class CameraInsideQuadric(GeometryError):
    """No occluding contour exists for a camera inside the surface."""


class OutOfRange(GeometryError):
    """Curve parameter outside the declared range."""


class NoEpipolarMatch(GeometryError):
    """Generator sampling too coarse to resolve the epipolar correspondence."""
