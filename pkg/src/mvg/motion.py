"""Differential camera motion and image velocity/acceleration relations.

The motion model is a second-order expansion at a reference time t = 0
where the camera frame coincides with the world frame (R(0) = I, c(0) = 0):
Omega and Omega_t generate the rotation, V = d(transl)/dt and V_t the
translation.  All image relations below are evaluated at t = 0 unless a
pose-at-t is passed explicitly.

Image time derivatives always satisfy e3 . gamma_t = e3 . gamma_tt = 0; the
implementations zero the third component after evaluating the identities so
the invariant holds exactly in floating point.

Frenet-decomposed velocities (alpha, beta) follow the package convention
n = t x e3, under which

    alpha =  Omega . gamma x (gamma x n) + q . (gamma x n)
    beta  = -Omega . gamma x (gamma x t) - q . (gamma x t)

with q = (V - Omega x transl + R Gamma^w_t)/rho.  The generalized L1
residual evaluates the published polynomial verbatim after mapping the
normal velocity to that equation's own orientation (beta -> -beta).

Pure functions; thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import E3, EPS, Eps, Frenet2, cross, norm, skew, vee
from .errors import EpipolarDegenerate, FlatSurfacePoint, NonSkew

_ZERO3 = np.zeros(3)


@dataclass(frozen=True)
class CameraMotion:
    """Differential camera motion {Omega, Omega_t, V, V_t} at t = 0."""

    Omega: np.ndarray
    V: np.ndarray
    Omega_t: np.ndarray = None  # type: ignore[assignment]
    V_t: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.Omega_t is None:
            object.__setattr__(self, "Omega_t", np.zeros(3))
        if self.V_t is None:
            object.__setattr__(self, "V_t", np.zeros(3))


@dataclass(frozen=True)
class CurveMotionState:
    """A curve point's instantaneous 3D state as seen at t = 0.

    kind is one of 'fixed', 'occluding', 'nonrigid'.  Fixed points carry
    zero Gw_t/Gw_tt; occluding states must have Gw_t along the visual ray
    (epipolar parametrization) and carry the normal curvature Kt of the
    surface along the ray.
    """

    gamma: np.ndarray
    rho: float
    Gw_t: np.ndarray = None  # type: ignore[assignment]
    Gw_tt: np.ndarray = None  # type: ignore[assignment]
    kind: str = "fixed"
    Kt: Optional[float] = None

    def __post_init__(self):
        if self.gamma[2] != 1.0:
            raise ValueError("CurveMotionState.gamma must have third component 1")
        if not self.rho > 0.0:
            raise ValueError("CurveMotionState.rho must be positive")
        if self.Gw_t is None:
            object.__setattr__(self, "Gw_t", np.zeros(3))
        if self.Gw_tt is None:
            object.__setattr__(self, "Gw_tt", np.zeros(3))
        if self.kind == "fixed":
            if norm(self.Gw_t) != 0.0 or norm(self.Gw_tt) != 0.0:
                raise ValueError("fixed states must have zero 3D velocity")
        elif self.kind == "occluding":
            m = norm(self.Gw_t)
            if m > 0.0 and norm(cross(self.Gw_t, self.gamma)) > 1e-10 * m * norm(self.gamma):
                raise ValueError("occluding state velocity must be ray-parallel")
        elif self.kind != "nonrigid":
            raise ValueError(f"unknown state kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Motion model


def angular_velocity(R_t, R, eps: Eps = EPS):
    """Rotation rate Omega from dR/dt and R via the skew part of R_t Rᵀ.

    Returns (Omega, residual) where residual is the norm of the symmetric
    part of R_t Rᵀ (zero for an exact rigid rotation).
    """
    M = np.asarray(R_t, dtype=float) @ np.asarray(R, dtype=float).T
    sym = 0.5 * (M + M.T)
    resid = float(np.max(np.abs(sym)))
    if resid > eps.skew:
        raise NonSkew(f"symmetric residual {resid:g} exceeds tolerance")
    return vee(M), resid


def taylor_pose(motion: CameraMotion, dt: float):
    """Second-order pose expansion (R(dt), transl(dt), c(dt)) about t = 0.

    R(dt)      = I + [Omega]^ dt + 1/2 ([Omega_t]^ + [Omega]^2) dt^2
    transl(dt) = V dt + 1/2 V_t dt^2
    c(dt)      = -V dt + 1/2 (-V_t + 2 [Omega]^ V) dt^2
    """
    Oh = skew(motion.Omega)
    R = np.eye(3) + Oh * dt + 0.5 * (skew(motion.Omega_t) + Oh @ Oh) * dt**2
    transl = motion.V * dt + 0.5 * motion.V_t * dt**2
    c = -motion.V * dt + 0.5 * (-motion.V_t + 2.0 * (Oh @ motion.V)) * dt**2
    return R, transl, c


def point_velocity_camera(Gamma, Gw_t, R=None, Omega=None, V=None, transl=None):
    """Camera-frame velocity of a 3D point: Gamma_t = [Omega]^ Gamma + R Gw_t - R c_t.

    With -R c_t = V - [Omega]^ transl; at t = 0 pass R = I, transl = 0 (the
    defaults), reducing to Gamma_t = Omega x Gamma + Gw_t + V.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    Omega = _ZERO3 if Omega is None else np.asarray(Omega, dtype=float)
    V = _ZERO3 if V is None else np.asarray(V, dtype=float)
    out = cross(Omega, Gamma) + V
    if Gw_t is not None:
        Gw = np.asarray(Gw_t, dtype=float)
        out = out + (Gw if R is None else np.asarray(R, dtype=float) @ Gw)
    if transl is not None:
        out = out - cross(Omega, np.asarray(transl, dtype=float))
    return out


# ---------------------------------------------------------------------------
# Image velocity and acceleration (t = 0)


def _velocity_kernel(gamma, rho, Gw_t, Omega, V):
    Og = cross(Omega, gamma)
    rho_t = float(np.dot(E3, rho * Og + Gw_t + V))
    gamma_t = (
        Og
        - Og[2] * gamma
        + (Gw_t - Gw_t[2] * gamma) / rho
        + (V - V[2] * gamma) / rho
    )
    gamma_t[2] = 0.0
    return gamma_t, rho_t


def image_velocity(state: CurveMotionState, motion: CameraMotion):
    """Velocity of the projected point and depth rate at t = 0.

    rho_t  = e3 . (rho [Omega]^ gamma + Gw_t + V)
    gamma_t = ([Omega]^g - (e3.[Omega]^g) g) + (Gw_t - (e3.Gw_t) g)/rho
              + (V - V_z g)/rho

    For occluding states (ray-parallel Gw_t) the Gw_t contribution to
    gamma_t cancels algebraically, reproducing the fixed-point flow.
    """
    return _velocity_kernel(state.gamma, state.rho, state.Gw_t, motion.Omega, motion.V)


def fixed_point_flow(gamma, rho: float, motion: CameraMotion):
    """Image velocity of a fixed 3D point (Gw_t = 0)."""
    gamma_t, _ = _velocity_kernel(
        np.asarray(gamma, dtype=float), rho, _ZERO3, motion.Omega, motion.V
    )
    return gamma_t


def occluding_flow(gamma, rho: float, motion: CameraMotion):
    """Apparent-contour velocity under epipolar parametrization.

    Identical to fixed_point_flow: the contour-generator slip is invisible
    to first order.  Exists as a named entry point for clarity.
    """
    return fixed_point_flow(gamma, rho, motion)


def _accel_matrix(motion: CameraMotion):
    Oh = skew(motion.Omega)
    return Oh @ Oh + skew(motion.Omega_t)


def image_acceleration(state: CurveMotionState, motion: CameraMotion):
    """Acceleration of the projected point and depth second derivative at t = 0.

    rho_tt  = rho e3.([Omega]^2+[Omega_t]^) g + 2 e3.[Omega]^ Gw_t
              + e3.Gw_tt + e3.V_t
    gamma_tt = ([Omega]^2+[Omega_t]^) g + 2 [Omega]^ Gw_t / rho + Gw_tt/rho
              + V_t/rho - 2 (rho_t/rho) gamma_t - (rho_tt/rho) g
    """
    g, rho = state.gamma, state.rho
    gamma_t, rho_t = image_velocity(state, motion)
    W = _accel_matrix(motion)
    Wg = W @ g
    OGw = cross(motion.Omega, state.Gw_t)
    rho_tt = rho * Wg[2] + 2.0 * OGw[2] + float(state.Gw_tt[2]) + float(motion.V_t[2])
    gamma_tt = (
        Wg
        + 2.0 * OGw / rho
        + state.Gw_tt / rho
        + motion.V_t / rho
        - (2.0 * rho_t / rho) * gamma_t
        - (rho_tt / rho) * g
    )
    gamma_tt[2] = 0.0
    return gamma_tt, rho_tt


def flow_decomposition(gamma):
    """The linear flow split gamma_t = (1/rho) A(gamma) V + B(gamma) Omega.

    A and B depend only on the image position (u, v); this is the basis of
    subspace methods.
    """
    u, v = float(gamma[0]), float(gamma[1])
    A = np.array([[1.0, 0.0, -u], [0.0, 1.0, -v], [0.0, 0.0, 0.0]])
    B = np.array(
        [
            [-u * v, 1.0 + u * u, -v],
            [-(1.0 + v * v), u * v, u],
            [0.0, 0.0, 0.0],
        ]
    )
    return A, B


def differential_epipolar_residual(gamma, gamma_t, motion: CameraMotion) -> float:
    """Signed residual of gamma_tᵀ [V]^ gamma + gammaᵀ [Omega]^ [V]^ gamma.

    Zero for any exact fixed-point flow (the instantaneous essential
    constraint); vacuous when V = 0.
    """
    Vxg = cross(motion.V, np.asarray(gamma, dtype=float))
    return float(np.dot(gamma_t, Vxg)) + float(np.dot(gamma, cross(motion.Omega, Vxg)))


# ---------------------------------------------------------------------------
# Frenet-decomposed curve velocities


def curve_velocity_frenet(
    state: CurveMotionState,
    frame2: Frenet2,
    motion: CameraMotion,
    R=None,
    transl=None,
):
    """Tangential/normal image velocity (alpha, beta) of a deforming curve.

    Valid for any t when the pose (R, transl) at that time is supplied; at
    t = 0 use the defaults R = I, transl = 0.  gamma_t = alpha t + beta n.
    """
    g = state.gamma
    q = motion.V.copy()
    if transl is not None:
        q = q - cross(motion.Omega, np.asarray(transl, dtype=float))
    if R is not None:
        q = q + np.asarray(R, dtype=float) @ state.Gw_t
    else:
        q = q + state.Gw_t
    q = q / state.rho
    gxn = cross(g, frame2.n)
    gxt = cross(g, frame2.t)
    alpha = float(np.dot(motion.Omega, cross(g, gxn))) + float(np.dot(q, gxn))
    beta = -float(np.dot(motion.Omega, cross(g, gxt))) - float(np.dot(q, gxt))
    return alpha, beta


def alpha_from_beta(beta, gamma, t, n, motion: CameraMotion, eps: Eps = EPS):
    """Tangential velocity from normal velocity without knowing depth.

    alpha = -[beta + Omega . g x (g x t)] (V.(g x n))/(V.(g x t))
            + Omega . g x (g x n)
    (signs per n = t x e3).  Degenerate when the epipolar line is tangent
    to the curve, i.e. V.(gamma x t) ~ 0.
    """
    g = np.asarray(gamma, dtype=float)
    gxt = cross(g, t)
    den = float(np.dot(motion.V, gxt))
    if abs(den) <= eps.epi:
        raise EpipolarDegenerate("V . (gamma x t) vanishes")
    gxn = cross(g, n)
    return (
        -(beta + float(np.dot(motion.Omega, cross(g, gxt))))
        * float(np.dot(motion.V, gxn))
        / den
        + float(np.dot(motion.Omega, cross(g, gxn)))
    )


def frenet_epipolar_residual(alpha, beta, gamma, t, n, motion: CameraMotion) -> float:
    """Instantaneous essential constraint in the image Frenet frame.

    (g x t).V [alpha - Omega.g x (g x n)] + (g x n).V [beta + Omega.g x (g x t)]
    vanishes for rigid-consistent (alpha, beta); identically zero when V = 0.
    """
    g = np.asarray(gamma, dtype=float)
    gxt = cross(g, t)
    gxn = cross(g, n)
    return float(np.dot(gxt, motion.V)) * (
        alpha - float(np.dot(motion.Omega, cross(g, gxn)))
    ) + float(np.dot(gxn, motion.V)) * (beta + float(np.dot(motion.Omega, cross(g, gxt))))


# ---------------------------------------------------------------------------
# Spatial variation of the velocity field


def gamma_st(
    state: CurveMotionState,
    gamma_s,
    rho_s: float,
    motion: CameraMotion,
    Gw_st=None,
):
    """Mixed derivative of the image point w.r.t. curve parameter and time.

    For fixed and occluding states (epipolar correspondence) the 3D-motion
    terms cancel and

        gamma_st = (-V + V_z g) rho_s/rho^2 - (V_z/rho) g_s + [Omega]^ g_s
                   - (e3.[Omega]^ g_s) g - (e3.[Omega]^ g) g_s;

    nonrigid states add the Gw_t / Gw_st terms of the deforming form.
    rho_s = e3 . Gamma_s.
    """
    g, rho = state.gamma, state.rho
    gs = np.asarray(gamma_s, dtype=float)
    V = motion.V
    Ogs = cross(motion.Omega, gs)
    Og = cross(motion.Omega, g)
    out = (
        (-V + V[2] * g) * (rho_s / rho**2)
        - (V[2] / rho) * gs
        + Ogs
        - Ogs[2] * g
        - Og[2] * gs
    )
    if state.kind == "nonrigid":
        Gw_t = state.Gw_t
        Gst = _ZERO3 if Gw_st is None else np.asarray(Gw_st, dtype=float)
        out = out + (Gst - Gst[2] * g - Gw_t[2] * gs) / rho
        out = out - (rho_s / rho**2) * (Gw_t - Gw_t[2] * g)
    out[2] = 0.0
    return out


def image_tangent_rate(gamma_st_vec, t, g_speed: float):
    """t_t from gamma_st via t = gamma_s / ||gamma_s||: the projection
    (I - t tᵀ) gamma_st / g."""
    gst = np.asarray(gamma_st_vec, dtype=float)
    return (gst - float(np.dot(t, gst)) * t) / g_speed


def gamma_tt_frenet(
    state: CurveMotionState, frame2: Frenet2, motion: CameraMotion, alpha, beta
):
    """Components (t . gamma_tt, n . gamma_tt) for a deforming curve at t = 0.

    Same content as image_acceleration dotted with t, n; stated through the
    measured (alpha, beta) as in the Frenet-frame corollary.
    """
    g, rho = state.gamma, state.rho
    W = _accel_matrix(motion)
    Wg = W @ g
    common2 = Wg + motion.V_t / rho + 2.0 * cross(motion.Omega, state.Gw_t) / rho + state.Gw_tt / rho
    scal1 = float(np.dot(E3, cross(motion.Omega, g) + motion.V / rho + state.Gw_t / rho))
    scal2 = float(common2[2])

    def component(w, ab):
        return (
            float(np.dot(w, Wg))
            + 2.0 * float(np.dot(w, cross(motion.Omega, state.Gw_t))) / rho
            + float(np.dot(w, state.Gw_tt)) / rho
            + float(np.dot(w, motion.V_t)) / rho
            - 2.0 * scal1 * ab
            - scal2 * float(np.dot(w, g))
        )

    return component(frame2.t, alpha), component(frame2.n, beta)


# ---------------------------------------------------------------------------
# Occluding contours


def contour_generator_velocity(gamma, rho: float, V, t, Kt: float, eps: Eps = EPS):
    """3D slip velocity of a contour generator at t = 0.

    Gw_t = (1/Kt) (V.(gamma x t) / (rho ||gamma x t||)) gamma / ||gamma||^2,
    ray-parallel by construction.  Kt is the surface normal curvature along
    the ray, positive for a surface curving away from the camera (sphere
    seen from outside: +1/r); the image tangent must be oriented so that
    gamma x t points along the inward surface normal.
    """
    if abs(Kt) <= eps.curv:
        raise FlatSurfacePoint("normal curvature along the ray vanishes")
    g = np.asarray(gamma, dtype=float)
    gxt = cross(g, t)
    scale = float(np.dot(V, gxt)) / (rho * norm(gxt))
    return (scale / Kt) * g / float(np.dot(g, g))


def occluding_gamma_tt(
    state: CurveMotionState, motion: CameraMotion, gamma_t=None, rho_t=None
):
    """Apparent-contour acceleration under epipolar parametrization at t = 0.

    Needs the generator slip Gw_t (e.g. from contour_generator_velocity)
    but, remarkably, no Gw_tt: the second-order surface terms cancel.
    gamma_t/rho_t default to the occluding flow and the moving-point depth
    rate (the depth rate keeps its e3.Gw_t term; only gamma_t collapses to
    the fixed form).
    """
    g, rho = state.gamma, state.rho
    if gamma_t is None or rho_t is None:
        gamma_t, rho_t = image_velocity(state, motion)
    W = _accel_matrix(motion)
    Wg = W @ g
    lam = float(state.Gw_t[2])  # e3 . Gw_t
    Og = cross(motion.Omega, g)
    OGw = cross(motion.Omega, state.Gw_t)
    out = (
        Wg
        - Wg[2] * g
        + 2.0 * OGw / rho
        + motion.V_t / rho
        - (2.0 * rho_t / rho) * gamma_t
        + (lam / rho) * gamma_t
        - (lam / rho) * Og
        - (float(motion.V_t[2]) / rho) * g
        - (2.0 * OGw[2] / rho) * g
        + (lam * Og[2] / rho) * g
    )
    out[2] = 0.0
    return out


# ---------------------------------------------------------------------------
# Generalized L1 equation


def l1_residual(
    gamma,
    t,
    beta: float,
    beta_t: float,
    motion: CameraMotion,
    rho: float,
    gamma_t,
    t_t,
    e3_dot_Gw_t: float = 0.0,
    include_correction_term: bool = True,
    contour_kind: str = "fixed",
):
    """Residual of the generalized L1 polynomial for fixed/occluding contours.

    Inputs are measured image quantities at t = 0: the point gamma, tangent
    t, normal velocity beta and its time rate beta_t (convention n = t x e3),
    plus the kinematic rates gamma_t, t_t from which the geometric time
    derivatives (gamma x t)_t and [gamma x (gamma x t)]_t are formed.  For
    occluding contours e3_dot_Gw_t carries the generator slip; it is zero
    for fixed curves.  The equation is not valid for arbitrary nonrigid
    contours.

    include_correction_term toggles the ([Omega]^ V).(gamma x t) [beta - ...]
    term whose absence in earlier published forms the residual exposes.

    Returns (raw, normalized); normalized divides by
    (||V|| + ||Omega|| rho) (|beta| + ||Omega||)^2 + tiny to be scale-free.
    """
    if contour_kind not in ("fixed", "occluding"):
        raise ValueError(
            "the L1 relation holds for fixed curves and occluding contours only"
        )
    g = np.asarray(gamma, dtype=float)
    t = np.asarray(t, dtype=float)
    gamma_t = np.asarray(gamma_t, dtype=float)
    t_t = np.asarray(t_t, dtype=float)
    O, V = motion.Omega, motion.V
    # the published polynomial is written for the opposite normal
    # orientation; map our measured beta onto it
    b = -beta
    b_t = -beta_t
    U = cross(g, t)
    U_t = cross(gamma_t, t) + cross(g, t_t)
    Up = cross(g, U)
    Up_t = cross(gamma_t, U) + cross(g, U_t)
    bb = b - float(np.dot(O, Up))
    VU = float(np.dot(V, U))
    raw = (
        float(V[2]) * bb**2
        + VU * (b_t - float(np.dot(motion.Omega_t, Up)) - float(np.dot(O, Up_t)))
        - (float(np.dot(motion.V_t, U)) + float(np.dot(V, U_t))) * bb
        + VU * float(cross(O, g)[2]) * bb
        + e3_dot_Gw_t * bb**2
    )
    if include_correction_term:
        raw += float(np.dot(cross(O, V), U)) * bb
    scale = (norm(V) + norm(O) * rho) * (abs(beta) + norm(O)) ** 2 + 1e-30
    return raw, raw / scale
