"""Fixed-size geometry core: Frenet frames, rigid transforms, perspective projection.

Conventions (used consistently by every downstream module):

* Vectors are numpy arrays of shape (3,), matrices shape (3, 3), row-major.
* 2D image entities are 3-vectors: points carry a fixed third component 1
  (normalized coordinates, focal length 1), tangents/normals a fixed 0.
* The image normal is n = t x e3.  A counterclockwise unit circle therefore
  has signed curvature kappa = -1; all projection/reconstruction formulas in
  this package carry signs consistent with this choice.
* Rotations map world vectors into the camera frame: Gamma = R (Gamma_w - c).

All functions are pure and operate on immutable values; the module is safe
for concurrent use from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    BehindCamera,
    NonRegular,
    SingularIntrinsics,
    ZeroCurvature,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Eps:
    """Library-wide degeneracy tolerances, overridable per call.

    reg:      minimum curve speed for a regular point
    curv:     minimum curvature for N/B/torsion to be defined
    depth:    minimum depth in front of a camera
    parallel: minimum two-ray triangulation denominator
    coplanar: relative skew-ray tolerance for triangulation
    epi:      minimum epipolar-plane crossing norm for tangent reconstruction
    skew:     maximum symmetric residual of dR/dt Rᵀ
    cond:     maximum condition number of the 3x3 reconstruction systems
    """

    reg: float = 1e-10
    curv: float = 1e-10
    depth: float = 1e-9
    parallel: float = 1e-12
    coplanar: float = 1e-8
    epi: float = 1e-10
    skew: float = 1e-6
    cond: float = 1e12


EPS = Eps()


def vec3(x, y, z, dtype=float):
    return np.array([x, y, z], dtype=dtype)


def cross(a, b):
    """Cross product of 3-vectors (dtype-preserving, faster than np.cross here)."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def norm(a):
    return float(np.sqrt(np.dot(a, a)))


def unit(a, eps: float = 0.0):
    n = norm(a)
    if n <= eps:
        raise NonRegular(f"cannot normalize vector of norm {n:g}")
    return a / n


def skew(v):
    """Skew-symmetric matrix [v]^ with [v]^ u = v x u."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(M):
    """Inverse of skew() for an (approximately) antisymmetric matrix."""
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def rot_axis_angle(axis, angle: float):
    """Rotation matrix about ``axis`` by ``angle`` (Rodrigues, active)."""
    a = unit(np.asarray(axis, dtype=float))
    K = skew(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rot_z(angle: float):
    """Active rotation about e3.  The convention is pinned by its action on e1:

    >>> np.allclose(rot_z(np.pi / 2) @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])
    True
    """
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(R, tol: float = 1e-12) -> bool:
    R = np.asarray(R)
    return (
        np.max(np.abs(R.T @ R - np.eye(3))) <= tol
        and abs(float(np.linalg.det(R)) - 1.0) <= 10 * tol
    )


# ---------------------------------------------------------------------------
# Frenet data


@dataclass(frozen=True)
class Frenet3:
    """Frenet data of a space-curve point.

    T, N, B are unit vectors; G is the parametrization speed; K >= 0 the
    curvature; Kdot the curvature derivative w.r.t. arc length; tau the
    torsion.  For straight-line storage (K = 0) N and B are None and
    Kdot/tau are meaningless zeros.
    """

    T: np.ndarray
    N: Optional[np.ndarray]
    B: Optional[np.ndarray]
    G: float
    K: float
    Kdot: float = 0.0
    tau: float = 0.0

    def validate(self, tol: float = 1e-12) -> None:
        assert abs(norm(self.T) - 1.0) <= tol
        assert self.G > 0.0
        assert self.K >= 0.0
        if self.N is not None:
            assert abs(norm(self.N) - 1.0) <= tol
            assert abs(float(np.dot(self.T, self.N))) <= tol
            assert norm(self.B - cross(self.T, self.N)) <= tol

    def rotated(self, R) -> "Frenet3":
        """Same intrinsic data with frame vectors expressed in a rotated basis."""
        return replace(
            self,
            T=R @ self.T,
            N=None if self.N is None else R @ self.N,
            B=None if self.B is None else R @ self.B,
        )


@dataclass(frozen=True)
class Frenet2:
    """Frenet data of an image-curve point (3-vectors with zero third component).

    n = t x e3 exactly; kappa is signed accordingly (ccw unit circle: -1).
    gprime, when set, is the speed derivative w.r.t. the same parameter g
    refers to (projection pipelines use space arc length).
    """

    t: np.ndarray
    n: np.ndarray
    g: float
    kappa: float
    kappadot: float = 0.0
    gprime: Optional[float] = None

    def validate(self, tol: float = 1e-12) -> None:
        assert self.t[2] == 0.0 and self.n[2] == 0.0
        assert abs(norm(self.t) - 1.0) <= tol
        assert norm(self.n - cross(self.t, E3)) <= tol
        assert self.g > 0.0


@dataclass(frozen=True)
class ImagePoint:
    """Normalized image point: gamma has third component exactly 1.

    Depth rho (and its parameter derivatives) ride along when known.
    """

    gamma: np.ndarray
    rho: Optional[float] = None
    rho_d1: Optional[float] = None
    rho_d2: Optional[float] = None

    def __post_init__(self):
        if self.gamma[2] != 1.0:
            raise ValueError("ImagePoint.gamma must have third component 1")
        if self.rho is not None and not self.rho > 0.0:
            raise ValueError("ImagePoint.rho must be positive")


@dataclass(frozen=True)
class CameraPose:
    """Extrinsics R (world->camera), center c, t = -Rc, plus intrinsics K_im."""

    R: np.ndarray
    c: np.ndarray
    K_im: np.ndarray
    t: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if not is_rotation(self.R):
            raise ValueError("CameraPose.R is not a rotation matrix")
        if self.t is None:
            object.__setattr__(self, "t", -(self.R @ self.c))
        elif norm(self.t + self.R @ self.c) > 1e-12:
            raise ValueError("CameraPose.t inconsistent with -Rc")
        if abs(float(np.linalg.det(self.K_im))) < 1e-12:
            raise SingularIntrinsics("K_im is singular")

    @property
    def e3_world(self):
        """Camera optical axis expressed in the world basis (row 3 of R)."""
        return self.R[2, :].copy()


def intrinsics_matrix(alpha_u, alpha_v, skew_=0.0, u0=0.0, v0=0.0):
    if not (alpha_u > 0.0 and alpha_v > 0.0):
        raise SingularIntrinsics("focal scales must be positive")
    return np.array([[alpha_u, skew_, u0], [0.0, alpha_v, v0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# Frenet extraction


def frenet3_from_derivatives(d1, d2, d3, eps: Eps = EPS) -> Frenet3:
    """Frenet data {G, T, N, B, K, Kdot, tau} from curve derivatives at a point.

    d1, d2, d3 are the first three derivatives w.r.t. an arbitrary parameter.
    Uses the frame expansion of the derivatives:

        d1 = G T
        d2 = G' T + G^2 K N
        d3 = (G'' - G^3 K^2) T + (3 G G' K + G^2 K') N + G^3 K tau B

    so K' (and hence Kdot = K'/G) comes from the N component of d3 and tau
    from the B component.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    d3 = np.asarray(d3, dtype=float)
    G = norm(d1)
    if G <= eps.reg:
        raise NonRegular(f"curve speed {G:g} below regularity threshold")
    T = d1 / G
    Gprime = float(np.dot(d1, d2)) / G
    curv_vec = d2 - Gprime * T  # = G^2 K N
    K = norm(curv_vec) / G**2
    if K <= eps.curv:
        raise ZeroCurvature(
            f"curvature {K:g} below threshold; N, B, tau, Kdot undefined",
            G=G,
            T=T,
            K=K,
        )
    N = curv_vec / (G**2 * K)
    B = cross(T, N)
    Kprime = (float(np.dot(d3, N)) - 3.0 * G * Gprime * K) / G**2
    Kdot = Kprime / G
    tau = float(np.dot(d3, B)) / (G**3 * K)
    return Frenet3(T=T, N=N, B=B, G=G, K=K, Kdot=Kdot, tau=tau)


def frenet2_from_derivatives(d1, d2, d3, eps: Eps = EPS) -> Frenet2:
    """Frenet data {g, t, n, kappa, kappadot} of an image curve from derivatives.

    Inputs are 3-vectors with zero third component.  n = t x e3, and

        d2 . n = g^2 kappa,        d3 . n = 3 g g' kappa + g^2 kappa'.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    d3 = np.asarray(d3, dtype=float)
    if d1[2] != 0.0 or d2[2] != 0.0 or d3[2] != 0.0:
        raise ValueError("image-curve derivatives must have zero third component")
    g = norm(d1)
    if g <= eps.reg:
        raise NonRegular(f"image speed {g:g} below regularity threshold")
    t = d1 / g
    n = cross(t, E3)
    gprime = float(np.dot(d2, t))
    kappa = float(np.dot(d2, n)) / g**2
    kappa_prime = (float(np.dot(d3, n)) - 3.0 * g * gprime * kappa) / g**2
    kappadot = kappa_prime / g
    return Frenet2(t=t, n=n, g=g, kappa=kappa, kappadot=kappadot)


# ---------------------------------------------------------------------------
# Rigid transforms and projection


def world_to_camera(p, pose: CameraPose):
    """Camera-frame coordinates R p + t of a world point p."""
    return pose.R @ np.asarray(p, dtype=float) + pose.t


def camera_to_world(p, pose: CameraPose):
    return pose.R.T @ (np.asarray(p, dtype=float) - pose.t)


def project(p_cam, eps: Eps = EPS) -> ImagePoint:
    """Perspective projection gamma = p/z with depth rho = z."""
    p = np.asarray(p_cam, dtype=float)
    z = float(p[2])
    if z <= eps.depth:
        raise BehindCamera(f"depth {z:g} not in front of the camera")
    gamma = p / z
    gamma[2] = 1.0
    return ImagePoint(gamma=gamma, rho=z)


def depth_lift(point: ImagePoint):
    """Camera-frame 3D point rho * gamma (inverse of project)."""
    if point.rho is None:
        raise ValueError("ImagePoint has no depth to lift")
    return point.rho * point.gamma


def depth_derivatives(f3: Frenet3, z: float):
    """Depth and its first two parameter derivatives (rho, rho', rho'').

    rho' = G T_z and rho'' = G' T_z + G^2 K N_z with G' taken as zero, i.e.
    valid for arc-length (or any constant-speed) parametrizations.
    """
    rho = z
    rho_d1 = f3.G * float(f3.T[2])
    if f3.N is None or f3.K == 0.0:
        rho_d2 = 0.0
    else:
        rho_d2 = f3.G**2 * f3.K * float(f3.N[2])
    return rho, rho_d1, rho_d2


def to_pixel(point: ImagePoint, K_im):
    """Pixel coordinates K_im gamma of a normalized image point."""
    K_im = np.asarray(K_im, dtype=float)
    if abs(float(np.linalg.det(K_im))) < 1e-12:
        raise SingularIntrinsics("K_im is singular")
    return K_im @ point.gamma


def from_pixel(gamma_im, K_im, rho: Optional[float] = None) -> ImagePoint:
    """Normalized image point K_im^{-1} gamma_im."""
    K_im = np.asarray(K_im, dtype=float)
    det = float(np.linalg.det(K_im))
    if abs(det) < 1e-12:
        raise SingularIntrinsics("K_im is singular")
    gamma = np.linalg.solve(K_im, np.asarray(gamma_im, dtype=float))
    gamma = gamma / gamma[2]
    gamma[2] = 1.0
    return ImagePoint(gamma=gamma, rho=rho)


# ---------------------------------------------------------------------------
# Small exact solver


def solve3_full_pivot(A, b, eps: Eps = EPS):
    """Solve a 3x3 system by Gaussian elimination with full pivoting.

    The reconstruction systems are square and exact by construction, so no
    least-squares fallback is provided: ill conditioning is surfaced via
    IllConditionedSystem (condition number >= eps.cond).
    """
    from .errors import IllConditionedSystem

    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.cond(A) >= eps.cond:
        raise IllConditionedSystem("3x3 system condition number exceeds bound")
    M = A.copy()
    rhs = b.copy()
    col_perm = [0, 1, 2]
    for k in range(3):
        sub = np.abs(M[k:, k:])
        i_rel, j_rel = np.unravel_index(int(np.argmax(sub)), sub.shape)
        i, j = k + int(i_rel), k + int(j_rel)
        if i != k:
            M[[k, i], :] = M[[i, k], :]
            rhs[[k, i]] = rhs[[i, k]]
        if j != k:
            M[:, [k, j]] = M[:, [j, k]]
            col_perm[k], col_perm[j] = col_perm[j], col_perm[k]
        for r in range(k + 1, 3):
            f = M[r, k] / M[k, k]
            M[r, k:] -= f * M[k, k:]
            rhs[r] -= f * rhs[k]
    y = np.empty(3)
    for k in (2, 1, 0):
        y[k] = (rhs[k] - float(np.dot(M[k, k + 1 :], y[k + 1 :]))) / M[k, k]
    x = np.empty(3)
    for k in range(3):
        x[col_perm[k]] = y[k]
    return x
