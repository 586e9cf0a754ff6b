"""Synthetic validation world: analytic curves, camera orbits, exact rendering.

Curve families (helix, parabola, ellipse, line, saddle) have hand-derived
closed-form derivatives up to third order, so every rendered sample carries
exact ground-truth differential geometry.  The camera orbit is closed form
in time, including its first and second derivatives, so differential-motion
quantities (Omega, Omega_t, V, V_t) at any frame are exact, and trajectory
oracles can be evaluated in extended precision (pass dtype=np.longdouble).

Scene construction is single-threaded; per-sample evaluation is pure and
order-deterministic.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .core import (
    EPS,
    CameraPose,
    Eps,
    Frenet3,
    cross,
    frenet3_from_derivatives,
    intrinsics_matrix,
    norm,
    rot_axis_angle,
    unit,
    vee,
)
from .errors import (
    CameraInsideQuadric,
    DegenerateLookAt,
    NoEpipolarMatch,
    NonRegular,
    OutOfRange,
    ZeroCurvature,
)
from .core import Frenet2, ImagePoint, project, to_pixel
from .motion import CameraMotion
from .projection import (
    ImageCurveSample,
    SpaceCurveSample,
    intrinsics_transfer,
    project_curve_sample,
)


# ---------------------------------------------------------------------------
# Analytic curve families


@dataclass(frozen=True)
class AnalyticCurve:
    """A parametric space curve with closed-form derivatives, rigidly placed.

    kind: helix | parabola | ellipse | line | saddle.  The model curve is
    rotated by rot_angle about rot_axis and shifted by origin.
    """

    id: str
    kind: str
    params: Dict[str, float]
    s0: float
    s1: float
    n: int
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rot_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    rot_angle: float = 0.0

    def __post_init__(self):
        if not self.s1 > self.s0:
            raise ValueError("degenerate parameter range")
        if self.n < 2:
            raise ValueError("need at least two samples")
        if self.kind not in _MODEL_EVALUATORS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        for s in np.linspace(self.s0, self.s1, 33):
            d1 = _MODEL_EVALUATORS[self.kind](self.params, float(s))[1]
            if norm(np.asarray(d1, dtype=float)) <= 1e-8:
                raise NonRegular(f"curve {self.id!r} not regular at s={s:g}")

    @property
    def rotation(self):
        return rot_axis_angle(self.rot_axis, self.rot_angle)

    @property
    def sample_params(self):
        return np.linspace(self.s0, self.s1, self.n)


def _helix(p, s):
    a, b = p["a"], p["b"]
    cs, sn = np.cos(s), np.sin(s)
    return (
        (a * cs, a * sn, b * s),
        (-a * sn, a * cs, b),
        (-a * cs, -a * sn, 0.0),
        (a * sn, -a * cs, 0.0),
    )


def _parabola(p, s):
    a = p["a"]
    return ((s, a * s * s, 0.0), (1.0, 2.0 * a * s, 0.0), (0.0, 2.0 * a, 0.0), (0.0, 0.0, 0.0))


def _ellipse(p, s):
    a, b = p["a"], p["b"]
    cs, sn = np.cos(s), np.sin(s)
    return (
        (a * cs, b * sn, 0.0),
        (-a * sn, b * cs, 0.0),
        (-a * cs, -b * sn, 0.0),
        (a * sn, -b * cs, 0.0),
    )


def _line(p, s):
    d = (p["dx"], p["dy"], p["dz"])
    return (
        (d[0] * s, d[1] * s, d[2] * s),
        d,
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
    )


def _saddle(p, s):
    a, b, c = p["a"], p["b"], p["c"]
    return (
        (a * s, b * s * s, c * s**3),
        (a, 2.0 * b * s, 3.0 * c * s * s),
        (0.0, 2.0 * b, 6.0 * c * s),
        (0.0, 0.0, 6.0 * c),
    )


_MODEL_EVALUATORS = {
    "helix": _helix,
    "parabola": _parabola,
    "ellipse": _ellipse,
    "line": _line,
    "saddle": _saddle,
}


def evaluate_curve(curve: AnalyticCurve, s: float, dtype=float):
    """World point and first three exact derivatives of the curve at s."""
    if s < curve.s0 - 1e-12 or s > curve.s1 + 1e-12:
        raise OutOfRange(f"s={s:g} outside [{curve.s0:g}, {curve.s1:g}]")
    g0, d1, d2, d3 = _MODEL_EVALUATORS[curve.kind](curve.params, dtype(s))
    R = curve.rotation
    point = R @ np.asarray(g0, dtype=dtype) + np.asarray(curve.origin, dtype=dtype)
    return (
        point,
        R @ np.asarray(d1, dtype=dtype),
        R @ np.asarray(d2, dtype=dtype),
        R @ np.asarray(d3, dtype=dtype),
    )


def sample_curve(curve: AnalyticCurve, eps: Eps = EPS) -> List[SpaceCurveSample]:
    """Uniform-parameter samples with full world-frame Frenet data.

    Straight lines carry K = 0 frames with N/B unset (the zero-curvature
    flag); all other families get the complete third-order data.
    """
    out = []
    for s in curve.sample_params:
        point, d1, d2, d3 = evaluate_curve(curve, float(s))
        try:
            f3 = frenet3_from_derivatives(d1, d2, d3, eps=eps)
        except ZeroCurvature as zc:
            f3 = Frenet3(T=zc.T, N=None, B=None, G=zc.G, K=0.0)
        out.append(SpaceCurveSample(point=point, frame=f3, frame_id="world"))
    return out


# ---------------------------------------------------------------------------
# Camera orbit (closed form in time, with exact derivatives)


@dataclass(frozen=True)
class Intrinsics:
    alpha_u: float = 500.0
    alpha_v: float = 500.0
    skew: float = 0.0
    u0: float = 250.0
    v0: float = 200.0
    width: float = 500.0
    height: float = 400.0

    def matrix(self):
        return intrinsics_matrix(self.alpha_u, self.alpha_v, self.skew, self.u0, self.v0)


@dataclass(frozen=True)
class Orbit:
    """Circular look-at orbit: c(t) = center + radius u(theta(t)) + offset a.

    theta(t) = phase + omega t; the camera looks at the orbit center with
    the orbit axis as the up direction.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 10.0
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    frames: int = 20
    # omega = 2 keeps the h^2 truncation of second centered differences above
    # the extended-precision rounding floor at h = 1e-4 (clean order-2 fits)
    omega: float = 2.0
    phase: float = 0.0
    axis_offset: float = 0.0

    def __post_init__(self):
        if not self.radius > 0.0:
            raise DegenerateLookAt("orbit radius must be positive (view along up axis)")
        a = np.asarray(self.axis, dtype=float)
        if norm(a) <= 1e-12:
            raise DegenerateLookAt("orbit axis is degenerate")

    @property
    def frame_dt(self) -> float:
        return 2.0 * np.pi / (self.frames * self.omega)

    def frame_time(self, f: int) -> float:
        return f * self.frame_dt

    def _basis(self):
        a = unit(np.asarray(self.axis, dtype=float))
        h = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u1 = unit(h - float(np.dot(h, a)) * a)
        return a, u1, cross(a, u1)


def orbit_R_c(orbit: Orbit, t, dtype=float):
    """Exact camera rotation (world->camera) and center at time t."""
    a, u1, u2 = orbit._basis()
    a = a.astype(dtype)
    u1 = u1.astype(dtype)
    u2 = u2.astype(dtype)
    th = dtype(orbit.phase) + dtype(orbit.omega) * dtype(t)
    u = np.cos(th) * u1 + np.sin(th) * u2
    up = -np.sin(th) * u1 + np.cos(th) * u2
    r, z = dtype(orbit.radius), dtype(orbit.axis_offset)
    d = np.sqrt(r * r + z * z)
    R = np.vstack([-up, (r * a - z * u) / d, -(r * u + z * a) / d])
    c = np.asarray(orbit.center, dtype=dtype) + r * u + z * a
    return R, c


def orbit_derivatives(orbit: Orbit, t, dtype=float):
    """(R, R_t, R_tt, c, c_t, c_tt) at time t, all closed form."""
    a, u1, u2 = orbit._basis()
    a = a.astype(dtype)
    u1 = u1.astype(dtype)
    u2 = u2.astype(dtype)
    w = dtype(orbit.omega)
    th = dtype(orbit.phase) + w * dtype(t)
    u = np.cos(th) * u1 + np.sin(th) * u2
    up = -np.sin(th) * u1 + np.cos(th) * u2
    r, z = dtype(orbit.radius), dtype(orbit.axis_offset)
    d = np.sqrt(r * r + z * z)
    R = np.vstack([-up, (r * a - z * u) / d, -(r * u + z * a) / d])
    R_t = w * np.vstack([u, -(z / d) * up, -(r / d) * up])
    R_tt = w * w * np.vstack([up, (z / d) * u, (r / d) * u])
    c = np.asarray(orbit.center, dtype=dtype) + r * u + z * a
    c_t = r * w * up
    c_tt = -r * w * w * u
    return R, R_t, R_tt, c, c_t, c_tt


def orbit_pose(orbit: Orbit, t: float, intrinsics: Intrinsics) -> CameraPose:
    R, c = orbit_R_c(orbit, t)
    return CameraPose(R=R, c=c, K_im=intrinsics.matrix())


def orbit_motion(orbit: Orbit, t: float) -> CameraMotion:
    """Exact differential motion at time t, recentered so the frame at t is
    the reference (R(0) = I, c(0) = 0 in the camera-at-t frame)."""
    R, R_t, R_tt, _, c_t, c_tt = orbit_derivatives(orbit, t)
    Oh = R_t @ R.T
    Omega = vee(Oh)
    Omega_t = vee(R_tt @ R.T + R_t @ R_t.T)
    V = -(R @ c_t)
    V_t = -2.0 * (Oh @ (R @ c_t)) - R @ c_tt
    return CameraMotion(Omega=Omega, V=V, Omega_t=Omega_t, V_t=V_t)


def look_at_pose(c, target, up, K_im) -> CameraPose:
    """General look-at camera; errors when the view direction is along up."""
    c = np.asarray(c, dtype=float)
    zdir = np.asarray(target, dtype=float) - c
    if norm(zdir) <= 1e-12:
        raise DegenerateLookAt("camera at the target")
    zc = unit(zdir)
    upv = np.asarray(up, dtype=float)
    x = cross(upv, zc)
    if norm(x) <= 1e-9 * norm(upv):
        raise DegenerateLookAt("view direction parallel to up vector")
    xc = unit(x)
    yc = cross(zc, xc)
    return CameraPose(R=np.vstack([xc, yc, zc]), c=c, K_im=np.asarray(K_im, dtype=float))


def camera_orbit(scene: "Scene") -> List[CameraPose]:
    """Ground-truth poses for every frame of the scene's orbit."""
    return [
        orbit_pose(scene.orbit, scene.orbit.frame_time(f), scene.intrinsics)
        for f in range(scene.orbit.frames)
    ]


# ---------------------------------------------------------------------------
# Quadrics and occluding contours


@dataclass(frozen=True)
class Quadric:
    """Axis-aligned sphere or ellipsoid: (X-center)ᵀ A (X-center) = 1."""

    id: str
    kind: str
    center: np.ndarray
    semi_axes: np.ndarray

    def __post_init__(self):
        sa = np.asarray(self.semi_axes, dtype=float)
        if not np.all(sa > 0.0):
            raise ValueError("semi-axes must be positive")
        if self.kind == "sphere" and not np.allclose(sa, sa[0]):
            raise ValueError("sphere must have equal semi-axes")
        if self.kind not in ("sphere", "ellipsoid"):
            raise ValueError(f"unknown quadric kind {self.kind!r}")

    @property
    def A(self):
        return np.diag(1.0 / np.asarray(self.semi_axes, dtype=float) ** 2)


class GeneratorCurve:
    """Closed-form contour generator of a quadric seen from camera center c.

    In the sphere space Z = S (X - q) (S = diag(1/semi_axes)) the generator
    is the circle |Z| = 1, Z . z_c = 1 with z_c = S (c - q): center
    z_c/|z_c|^2, radius sqrt(1 - 1/|z_c|^2).  direction=+1/-1 fixes the
    traversal orientation.
    """

    def __init__(self, quadric: Quadric, c, direction: int = 1):
        q = np.asarray(quadric.center, dtype=float)
        sa = np.asarray(quadric.semi_axes, dtype=float)
        z_c = (np.asarray(c, dtype=float) - q) / sa
        m2 = float(np.dot(z_c, z_c))
        if m2 <= 1.0:
            raise CameraInsideQuadric("camera center inside (or on) the quadric")
        self.quadric = quadric
        self.q = q
        self.sa = sa
        self.z0 = z_c / m2
        self.r_z = float(np.sqrt(1.0 - 1.0 / m2))
        zc_hat = z_c / np.sqrt(m2)
        ref = np.array([0.0, 0.0, 1.0])
        if abs(float(np.dot(ref, zc_hat))) > 0.9:
            ref = np.array([1.0, 0.0, 0.0])
        self.w1 = unit(ref - float(np.dot(ref, zc_hat)) * zc_hat)
        self.w2 = float(direction) * cross(zc_hat, self.w1)
        self.direction = direction

    def point(self, phi: float):
        z = self.z0 + self.r_z * (np.cos(phi) * self.w1 + np.sin(phi) * self.w2)
        return self.q + self.sa * z

    def derivatives(self, phi: float):
        """Point and first three derivatives w.r.t. phi."""
        cp, sp = np.cos(phi), np.sin(phi)
        ring = self.r_z * (cp * self.w1 + sp * self.w2)
        ring_p = self.r_z * (-sp * self.w1 + cp * self.w2)
        X = self.q + self.sa * (self.z0 + ring)
        d1 = self.sa * ring_p
        d2 = -self.sa * ring
        d3 = -d1
        return X, d1, d2, d3

    def normal_out(self, X):
        """Outward unit surface normal at a generator point."""
        return unit(self.quadric.A @ (np.asarray(X, dtype=float) - self.q))

    def normal_curvature(self, X, c):
        """Normal curvature of the surface along the viewing ray (positive:
        surface curving away from an outside camera)."""
        A = self.quadric.A
        v = unit(np.asarray(X, dtype=float) - np.asarray(c, dtype=float))
        return float(v @ A @ v) / norm(A @ (np.asarray(X, dtype=float) - self.q))


def quadric_contour_generator(
    quadric: Quadric, pose: CameraPose, n: int, eps: Eps = EPS
) -> List[Tuple[SpaceCurveSample, float, np.ndarray]]:
    """Sampled contour generator with Frenet data, K^t and surface normal.

    The traversal direction is chosen so that in the image gamma x t points
    along the inward surface normal (the orientation contour_generator_velocity
    expects).  Occlusion condition (X - c) . N = 0 holds in closed form.
    """
    gen = GeneratorCurve(quadric, pose.c, direction=1)
    # orient the traversal so that (gamma x t) . (R N_out) < 0 at phi = 0
    X, d1, _, _ = gen.derivatives(0.0)
    ipt = project(pose.R @ X + pose.t, eps=eps)
    T_cam = unit(pose.R @ d1)
    tvec = T_cam - T_cam[2] * ipt.gamma
    sgn = float(np.dot(cross(ipt.gamma, tvec), pose.R @ gen.normal_out(X)))
    if sgn > 0.0:
        gen = GeneratorCurve(quadric, pose.c, direction=-1)
    out = []
    for phi in np.linspace(0.0, 2.0 * np.pi, n, endpoint=False):
        X, d1, d2, d3 = gen.derivatives(float(phi))
        f3 = frenet3_from_derivatives(d1, d2, d3, eps=eps)
        Kt = gen.normal_curvature(X, pose.c)
        out.append(
            (SpaceCurveSample(point=X, frame=f3, frame_id="world"), Kt, gen.normal_out(X))
        )
    return out


def generator_slip_velocity(quadric: Quadric, X, c, c_t):
    """Closed-form epipolar slip of a generator point (implicit-derivative
    route, independent of the image-based formula): Xdot = mu (X - c) with
    mu = c_tᵀ A (X - q) / (X - c)ᵀ A (X - c)."""
    A = quadric.A
    Y = np.asarray(X) - np.asarray(quadric.center, dtype=np.asarray(X).dtype)
    ray = np.asarray(X) - np.asarray(c)
    mu = float(np.dot(c_t, A @ Y)) / float(ray @ A @ ray)
    return mu * ray


def track_occluding_point(
    quadric: Quadric, orbit: Orbit, t0: float, X0, t1: float, steps: int = 16, dtype=float
):
    """Integrate the epipolar-parametrization track from (t0, X0) to t1.

    RK4 on Xdot = mu(X, t)(X - c(t)); with a handful of steps the local
    error is far below finite-difference truncation at any h used by the
    convergence oracles.
    """
    A = quadric.A.astype(dtype)
    q = np.asarray(quadric.center, dtype=dtype)

    def f(t, X):
        _, _, _, c, c_t, _ = orbit_derivatives(orbit, t, dtype=dtype)
        Y = X - q
        ray = X - c
        mu = (c_t @ (A @ Y)) / (ray @ (A @ ray))
        return mu * ray

    X = np.asarray(X0, dtype=dtype).copy()
    h = (dtype(t1) - dtype(t0)) / steps
    t = dtype(t0)
    for _ in range(steps):
        k1 = f(t, X)
        k2 = f(t + h / 2, X + h / 2 * k1)
        k3 = f(t + h / 2, X + h / 2 * k2)
        k4 = f(t + h, X + h * k3)
        X = X + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
    return X


def epipolar_correspond(
    quadric: Quadric,
    orbit: Orbit,
    t0: float,
    t1: float,
    n: int,
    angle_tol: float = 1e-6,
):
    """Match generator samples across two frames under the epipolar plane.

    For each of n samples at t0, the correspondent at t1 is chosen so its
    displacement lies in the epipolar plane (the plane of the visual ray
    and the camera motion, realized at finite spacing as the plane through
    c(t0), c(t1) and the sample).  Crossings of the plane with the sampled
    generator at t1 are located by sign changes between consecutive
    samples and refined by bisection; the correspondent is the crossing
    with the same orientation as the source sample, nearest in space.  The
    refined displacement must lie within angle_tol radians of the plane.

    Samples at epipolar tangency (camera velocity in the surface tangent
    plane, slip -> 0) have no well-defined correspondent and are skipped;
    they are returned separately.  Away from tangency, NoEpipolarMatch
    flags sampling too coarse: near the tangency points the two plane
    crossings approach each other, and a grid whose cells cannot separate
    them shows no sign change.

    Returns (matches, skipped_indices); matches are Match tuples
    (index, X0, X1, Gw_t, tangency_margin) with the first-order slip
    estimate (X1 - X0)/(t1 - t0).  Matches close to tangency carry a small
    tangency_margin (generator tangent nearly in-plane) and estimate the
    slip poorly there.
    """
    _, c0 = orbit_R_c(orbit, t0)
    _, c1 = orbit_R_c(orbit, t1)
    gen0 = GeneratorCurve(quadric, c0)
    gen1 = GeneratorCurve(quadric, c1)
    phis = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    pts1 = np.array([gen1.point(float(p)) for p in phis])
    h = t1 - t0
    baseline = c1 - c0
    out = []
    skipped = []
    for i, phi in enumerate(phis):
        X0 = gen0.point(float(phi))
        if abs(float(np.dot(baseline, gen0.normal_out(X0)))) < 0.03 * norm(baseline):
            skipped.append(i)
            continue
        n_plane = cross(X0 - c0, baseline)
        n_plane = n_plane / norm(n_plane)

        def g(p):
            return float(np.dot(gen1.point(p) - X0, n_plane))

        # localize crossings by sign changes of the sampled generator; a grid
        # that cannot separate the two plane crossings is too coarse
        off = pts1 @ n_plane - float(np.dot(X0, n_plane))
        roots = []
        for k in range(n):
            k2 = (k + 1) % n
            a, b = float(phis[k]), float(phis[k]) + 2.0 * np.pi / n
            if off[k] == 0.0:
                roots.append((a, 1.0 if off[k2] > 0 else -1.0))
            elif off[k] * off[k2] < 0.0:
                r = _bisect(g, a, b, off[k])
                roots.append((r, 1.0 if off[k2] > off[k] else -1.0))
        # the true correspondent crosses the plane in the same direction as
        # the source sample does
        want = float(np.dot(gen0.derivatives(float(phi))[1], n_plane))
        roots = [r for r in roots if r[1] * want > 0.0]
        if not roots:
            raise NoEpipolarMatch(
                f"sample {i}: generator sampling (n={n}) cannot resolve the "
                "epipolar crossing"
            )
        cand = [gen1.point(r[0]) for r in roots]
        X1 = min(cand, key=lambda X: norm(X - X0))
        d = X1 - X0
        ang = abs(float(np.dot(d, n_plane))) / max(norm(d), 1e-300)
        if ang > angle_tol:
            raise NoEpipolarMatch(
                f"sample {i}: refined match {ang:.3g} rad off the epipolar plane"
            )
        phi_star = roots[int(np.argmin([norm(X - X0) for X in cand]))][0]
        t1vec = gen1.derivatives(phi_star)[1]
        margin = abs(float(np.dot(t1vec, n_plane))) / norm(t1vec)
        out.append(Match(i, X0, X1, (X1 - X0) / h, margin))
    return out, skipped


def norm_rows(M):
    return np.sqrt(np.sum(M * M, axis=1))


Match = namedtuple("Match", ["index", "X0", "X1", "Gw_t", "tangency_margin"])


def _bisect(g, a, b, ga, iters: int = 120):
    for _ in range(iters):
        mid = 0.5 * (a + b)
        gmid = g(mid)
        if ga * gmid <= 0.0:
            b = mid
        else:
            a, ga = mid, gmid
        if b - a < 1e-15:
            break
    return 0.5 * (a + b)




# ---------------------------------------------------------------------------
# Scene and rendering


@dataclass(frozen=True)
class Scene:
    curves: List[AnalyticCurve]
    quadrics: List[Quadric]
    orbit: Orbit
    intrinsics: Intrinsics


@dataclass(frozen=True)
class ViewSample:
    """One rendered (pixel-coordinate) sample with provenance and truth."""

    curve_id: str
    sample_id: int
    s: float
    frame_id: int
    image: ImageCurveSample
    depth: float
    world: SpaceCurveSample


def render_view(
    scene: Scene,
    samples: Dict[str, List[SpaceCurveSample]],
    svals: Dict[str, np.ndarray],
    frame_id: int,
    eps: Eps = EPS,
) -> Tuple[List[ViewSample], Dict[str, int]]:
    """Project world samples into one orbit frame as subpixel edgels.

    Differential geometry goes through the projection theorems and the
    intrinsics transfer; behind-camera and out-of-frame samples are dropped
    and counted, never clamped.
    """
    from .errors import GeometryError

    pose = orbit_pose(scene.orbit, scene.orbit.frame_time(frame_id), scene.intrinsics)
    K_im = scene.intrinsics.matrix()
    drops = {"behind_camera": 0, "out_of_frame": 0, "degenerate": 0}
    out = []
    for curve in scene.curves:
        curve_samples = samples[curve.id]
        ss = svals[curve.id]
        for k, sample in enumerate(curve_samples):
            p_cam = pose.R @ sample.point + pose.t
            if p_cam[2] <= eps.depth:
                drops["behind_camera"] += 1
                continue
            cam_sample = SpaceCurveSample(
                point=p_cam, frame=sample.frame.rotated(pose.R), frame_id=f"camera:{frame_id}"
            )
            try:
                img_norm = project_curve_sample(cam_sample, eps=eps)
            except GeometryError:
                # e.g. tangent along the visual ray (stationary image point)
                drops["degenerate"] += 1
                continue
            gamma_im = to_pixel(img_norm.point, K_im)
            u, v = float(gamma_im[0]), float(gamma_im[1])
            if not (0.0 <= u <= scene.intrinsics.width and 0.0 <= v <= scene.intrinsics.height):
                drops["out_of_frame"] += 1
                continue
            f2n = img_norm.frame2
            f2_unit = Frenet2(t=f2n.t, n=f2n.n, g=1.0, kappa=f2n.kappa, kappadot=f2n.kappadot)
            f2_pix = intrinsics_transfer(f2_unit, K_im, eps=eps)
            pix_sample = ImageCurveSample(
                point=ImagePoint(gamma=np.array([u, v, 1.0]), rho=img_norm.point.rho),
                frame2=f2_pix,
                coords="pixel",
            )
            out.append(
                ViewSample(
                    curve_id=curve.id,
                    sample_id=k,
                    s=float(ss[k]),
                    frame_id=frame_id,
                    image=pix_sample,
                    depth=float(img_norm.point.rho),
                    world=sample,
                )
            )
    return out, drops


def project_curve_derivatives(p_cam, d1, d2, d3):
    """Exact derivatives of gamma = Gamma/z from camera-frame curve derivatives.

    Quotient rule through third order; the independent oracle for the
    projection theorems (compose with frenet2_from_derivatives).
    """
    z = p_cam[2]
    z1, z2, z3 = d1[2], d2[2], d3[2]
    g0 = p_cam / z
    g1 = d1 / z - p_cam * (z1 / z**2)
    g2 = d2 / z - 2.0 * d1 * (z1 / z**2) - p_cam * (z2 / z**2) + 2.0 * p_cam * (z1**2 / z**3)
    g3 = (
        d3 / z
        - 3.0 * d2 * (z1 / z**2)
        - 3.0 * d1 * (z2 / z**2)
        + 6.0 * d1 * (z1**2 / z**3)
        - p_cam * (z3 / z**2)
        + 6.0 * p_cam * (z1 * z2 / z**3)
        - 6.0 * p_cam * (z1**3 / z**4)
    )
    # e3 . gamma^(i) = 0 holds exactly; clear the floating-point dust
    g0 = g0.copy()
    g0[2] = 1.0
    for gi in (g1, g2, g3):
        gi[2] = 0.0
    return g0, g1, g2, g3


# ---------------------------------------------------------------------------
# Default scene


def default_scene(frames: int = 20, samples_per_curve: int = 100) -> Scene:
    """The standard validation scene: five curve families inside a 500x400
    frustum seen from a radius-10 orbit, plus a sphere and an ellipsoid."""
    curves = [
        AnalyticCurve(
            id="helix",
            kind="helix",
            params={"a": 1.0, "b": 0.25},
            s0=-np.pi,
            s1=np.pi,
            n=samples_per_curve,
            origin=np.array([0.0, 0.2, 0.3]),
            rot_axis=np.array([1.0, 0.0, 0.0]),
            rot_angle=0.3,
        ),
        AnalyticCurve(
            id="parabola",
            kind="parabola",
            params={"a": 0.5},
            s0=-1.4,
            s1=1.4,
            n=samples_per_curve,
            origin=np.array([0.3, -0.4, 0.5]),
            rot_axis=np.array([0.0, 1.0, 0.0]),
            rot_angle=-0.4,
        ),
        AnalyticCurve(
            id="ellipse",
            kind="ellipse",
            params={"a": 1.5, "b": 0.8},
            s0=0.0,
            s1=6.0,
            n=samples_per_curve,
            origin=np.array([-0.2, 0.3, -0.4]),
            rot_axis=unit(np.array([1.0, 1.0, 0.0])),
            rot_angle=0.5,
        ),
        AnalyticCurve(
            id="line",
            kind="line",
            params={"dx": 0.5, "dy": 0.3, "dz": 0.8},
            s0=-1.5,
            s1=1.5,
            n=samples_per_curve,
            origin=np.array([0.4, -0.2, 0.1]),
        ),
        AnalyticCurve(
            id="saddle",
            kind="saddle",
            params={"a": 1.0, "b": 0.7, "c": 0.5},
            s0=-1.0,
            s1=1.0,
            n=samples_per_curve,
            origin=np.array([-0.3, -0.3, 0.2]),
            rot_axis=np.array([0.0, 0.0, 1.0]),
            rot_angle=0.7,
        ),
    ]
    quadrics = [
        Quadric(id="sphere", kind="sphere", center=np.array([0.1, 0.0, 0.15]), semi_axes=np.array([0.8, 0.8, 0.8])),
        Quadric(
            id="ellipsoid",
            kind="ellipsoid",
            center=np.array([-0.15, 0.1, -0.2]),
            semi_axes=np.array([1.1, 0.8, 0.6]),
        ),
    ]
    return Scene(
        curves=curves,
        quadrics=quadrics,
        orbit=Orbit(frames=frames),
        intrinsics=Intrinsics(),
    )


# ---------------------------------------------------------------------------
# Scene (de)serialization


def scene_to_dict(scene: Scene) -> dict:
    return {
        "curves": [
            {
                "id": c.id,
                "kind": c.kind,
                "params": dict(sorted(c.params.items())),
                "range": [c.s0, c.s1],
                "samples": c.n,
                "origin": list(map(float, c.origin)),
                "rot_axis": list(map(float, c.rot_axis)),
                "rot_angle": c.rot_angle,
            }
            for c in scene.curves
        ],
        "quadrics": [
            {
                "id": q.id,
                "kind": q.kind,
                "center": list(map(float, q.center)),
                "semi_axes": list(map(float, q.semi_axes)),
            }
            for q in scene.quadrics
        ],
        "orbit": {
            "center": list(map(float, scene.orbit.center)),
            "radius": scene.orbit.radius,
            "axis": list(map(float, scene.orbit.axis)),
            "frames": scene.orbit.frames,
            "omega": scene.orbit.omega,
            "phase": scene.orbit.phase,
            "axis_offset": scene.orbit.axis_offset,
        },
        "intrinsics": {
            "alpha_u": scene.intrinsics.alpha_u,
            "alpha_v": scene.intrinsics.alpha_v,
            "skew": scene.intrinsics.skew,
            "u0": scene.intrinsics.u0,
            "v0": scene.intrinsics.v0,
            "width": scene.intrinsics.width,
            "height": scene.intrinsics.height,
        },
    }


def scene_from_dict(d: dict) -> Scene:
    curves = [
        AnalyticCurve(
            id=c["id"],
            kind=c["kind"],
            params={k: float(v) for k, v in c["params"].items()},
            s0=float(c["range"][0]),
            s1=float(c["range"][1]),
            n=int(c["samples"]),
            origin=np.asarray(c.get("origin", [0, 0, 0]), dtype=float),
            rot_axis=np.asarray(c.get("rot_axis", [0, 0, 1]), dtype=float),
            rot_angle=float(c.get("rot_angle", 0.0)),
        )
        for c in d["curves"]
    ]
    quadrics = [
        Quadric(
            id=q["id"],
            kind=q["kind"],
            center=np.asarray(q["center"], dtype=float),
            semi_axes=np.asarray(q["semi_axes"], dtype=float),
        )
        for q in d.get("quadrics", [])
    ]
    o = d["orbit"]
    orbit = Orbit(
        center=np.asarray(o.get("center", [0, 0, 0]), dtype=float),
        radius=float(o["radius"]),
        axis=np.asarray(o.get("axis", [0, 0, 1]), dtype=float),
        frames=int(o["frames"]),
        omega=float(o.get("omega", 1.0)),
        phase=float(o.get("phase", 0.0)),
        axis_offset=float(o.get("axis_offset", 0.0)),
    )
    i = d["intrinsics"]
    intr = Intrinsics(
        alpha_u=float(i["alpha_u"]),
        alpha_v=float(i["alpha_v"]),
        skew=float(i.get("skew", 0.0)),
        u0=float(i["u0"]),
        v0=float(i["v0"]),
        width=float(i["width"]),
        height=float(i["height"]),
    )
    return Scene(curves=curves, quadrics=quadrics, orbit=orbit, intrinsics=intr)
