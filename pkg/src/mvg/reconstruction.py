"""Two-view reconstruction of space-curve differential geometry.

All vectors here live in the common world coordinate basis: rays are
scaled so e3_i . gamma_i = 1 (the per-view depth is then the coefficient of
gamma_i), tangents are the rotated image tangents, and e3_i is the optical
axis of view i.  lift_measurement owns this normalization.

The reconstruction chain is: triangulate -> tangent -> curvature (3x3
linear system in the vector N K) -> torsion/curvature-derivative (3x3
system in tau_tilde = Kdot N + K tau B), everything under the space
arc-length convention G = 1.  The 3x3 systems are solved by direct
elimination with full pivoting; ill conditioning raises instead of being
absorbed by least squares.

Signs: with n = t x e3 the image curvature enters the linear systems
through rows (t_i x gamma_i) (equivalently, a sign flip of the raw
(gamma_i x t_i) contraction).

Pure functions; thread-safe; batches parallelize trivially.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .core import (
    EPS,
    CameraPose,
    Eps,
    Frenet3,
    cross,
    norm,
    solve3_full_pivot,
    unit,
)
from .errors import (
    BehindCamera,
    EpipolarTangency,
    InconsistentSign,
    NegativeDepth,
    NonCoplanarRays,
    ParallelRays,
    StationaryImagePoint,
    ZeroCurvature,
)
from .projection import ImageCurveSample, SpaceCurveSample, project_curve_sample


@dataclass(frozen=True)
class ViewMeasurement:
    """One view's measurement of a curve point, in the world basis.

    gamma: ray scaled so e3 . gamma = 1;  t: unit image tangent rotated to
    the world basis (still orthogonal to e3);  kappa/kappadot: intrinsic
    image curvature data (rotation invariant);  e3: optical axis;  c: camera
    center.
    """

    gamma: np.ndarray
    t: np.ndarray
    kappa: float
    kappadot: float
    e3: np.ndarray
    c: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        assert abs(float(np.dot(self.e3, self.gamma)) - 1.0) <= tol
        assert abs(float(np.dot(self.e3, self.t))) <= tol


@dataclass(frozen=True)
class ReconstructedPoint:
    """Full two-view reconstruction with diagnostics."""

    Gamma_w: np.ndarray
    rho1: float
    rho2: float
    frame: Frenet3
    theta1: float
    theta2: float
    eps_sign: int
    g1: float
    g2: float
    gprime1: float
    gprime2: float
    residuals: Dict[str, float]
    zero_curvature: bool = False


def lift_measurement(sample: ImageCurveSample, pose: CameraPose) -> ViewMeasurement:
    """Rotate a normalized-coordinate measurement into the world basis."""
    if sample.coords != "normalized":
        raise ValueError("lift_measurement expects normalized coordinates")
    Rt = pose.R.T
    return ViewMeasurement(
        gamma=Rt @ sample.point.gamma,
        t=Rt @ sample.frame2.t,
        kappa=sample.frame2.kappa,
        kappadot=sample.frame2.kappadot,
        e3=pose.e3_world,
        c=pose.c.copy(),
    )


def triangulate(m1: ViewMeasurement, m2: ViewMeasurement, eps: Eps = EPS):
    """Depths and point from two rays:  rho1 g1 - rho2 g2 = c2 - c1.

    Returns (rho1, rho2, Gamma_w, residual) where the residual is the gap
    between the two reconstructed points (zero for exactly coplanar rays).
    """
    g1, g2 = m1.gamma, m2.gamma
    b = m2.c - m1.c
    g1g1 = float(np.dot(g1, g1))
    g2g2 = float(np.dot(g2, g2))
    g1g2 = float(np.dot(g1, g2))
    den = g1g1 * g2g2 - g1g2**2
    if den <= eps.parallel:
        raise ParallelRays("triangulation denominator vanishes")
    g1xg2 = cross(g1, g2)
    skew_resid = abs(float(np.dot(b, g1xg2)))
    if skew_resid > eps.coplanar * norm(b) * norm(g1xg2):
        raise NonCoplanarRays(f"rays skew: residual {skew_resid:g}")
    bg1 = float(np.dot(b, g1))
    bg2 = float(np.dot(b, g2))
    rho1 = (bg1 * g2g2 - bg2 * g1g2) / den
    rho2 = (bg1 * g1g2 - bg2 * g1g1) / den
    if rho1 <= 0.0 or rho2 <= 0.0:
        raise NegativeDepth(f"depths ({rho1:g}, {rho2:g}) not both positive")
    p1 = m1.c + rho1 * g1
    p2 = m2.c + rho2 * g2
    return rho1, rho2, 0.5 * (p1 + p2), norm(p1 - p2)


def reconstruct_tangent(m1: ViewMeasurement, m2: ViewMeasurement, eps: Eps = EPS):
    """Space tangent from two image tangents, as the epipolar-plane crossing.

    T = +/- unit((t1 x gamma1) x (t2 x gamma2)) with the sign fixed by
    requiring [T - (T.e3_i) gamma_i] . t_i > 0 in both views; the two
    conditions must agree.  Also returns theta_i = angle(T, gamma_i) in
    [0, pi) from the arctangent formulas.
    """
    n1 = cross(m1.t, m1.gamma)
    n2 = cross(m2.t, m2.gamma)
    axis = cross(n1, n2)
    n_axis = norm(axis)
    if n_axis <= eps.epi:
        raise EpipolarTangency("image tangents lie in the epipolar plane")
    T = axis / n_axis
    s1 = float(np.dot(T - float(np.dot(T, m1.e3)) * m1.gamma, m1.t))
    s2 = float(np.dot(T - float(np.dot(T, m2.e3)) * m2.gamma, m2.t))
    if s1 * s2 < 0.0 and min(abs(s1), abs(s2)) > 1e-12:
        raise InconsistentSign("tangent orientation conditions disagree")
    eps_sign = 1 if (s1 + s2) > 0.0 else -1
    T = eps_sign * T

    def theta(m_self: ViewMeasurement, m_other: ViewMeasurement) -> float:
        # tan(theta_self) = -(gamma_self . w) / (||gamma_self|| t_self . w)
        w = cross(m_other.gamma, m_other.t)
        den = float(np.dot(m_self.t, w))
        if den == 0.0:
            return np.pi / 2
        th = float(np.arctan(-float(np.dot(m_self.gamma, w)) / (norm(m_self.gamma) * den)))
        return th if th >= 0.0 else th + np.pi

    th1, th2 = theta(m1, m2), theta(m2, m1)
    # debug: T must be directed along cos(theta) gamma_hat + sin(theta) t in each
    # view (gamma_hat and t are not orthogonal, so only the direction is pinned)
    assert norm(T - unit(np.cos(th1) * m1.gamma / norm(m1.gamma) + np.sin(th1) * m1.t)) <= 1e-9
    assert norm(T - unit(np.cos(th2) * m2.gamma / norm(m2.gamma) + np.sin(th2) * m2.t)) <= 1e-9
    return T, th1, th2, eps_sign


def depth_speed_relations(m1: ViewMeasurement, m2: ViewMeasurement, eps: Eps = EPS):
    """The two intrinsic depth-speed ratios rho_i' / (rho_i g_i).

    rho1'/(rho1 g1) = - t1.(gamma2 x t2) / gamma1.(gamma2 x t2), and
    symmetrically for view 2.
    """
    w2 = cross(m2.gamma, m2.t)
    w1 = cross(m1.gamma, m1.t)
    d1 = float(np.dot(m1.gamma, w2))
    d2 = float(np.dot(m2.gamma, w1))
    if abs(d1) <= eps.epi or abs(d2) <= eps.epi:
        raise EpipolarTangency("depth-speed relation denominator vanishes")
    return -float(np.dot(m1.t, w2)) / d1, -float(np.dot(m2.t, w1)) / d2


def two_view_speed_ratio(T, m1: ViewMeasurement, m2: ViewMeasurement, rho1, rho2, eps: Eps = EPS):
    """Ratio g1/g2 of image parametrization speeds at corresponding points."""
    T = np.asarray(T, dtype=float)
    p1 = norm(T - float(np.dot(m1.e3, T)) * m1.gamma)
    p2 = norm(T - float(np.dot(m2.e3, T)) * m2.gamma)
    if p1 <= eps.reg or p2 <= eps.reg:
        raise StationaryImagePoint("stationary image point in one view")
    return (rho2 / rho1) * (p1 / p2)


def _view_speed(T, m: ViewMeasurement, rho: float) -> float:
    """g_i under G = 1: ||T - (e3_i.T) gamma_i|| / rho_i."""
    return norm(T - float(np.dot(m.e3, T)) * m.gamma) / rho


def reconstruct_curvature(
    m1: ViewMeasurement,
    m2: ViewMeasurement,
    T,
    rho1,
    rho2,
    g1,
    g2,
    eps: Eps = EPS,
):
    """Space curvature and normal by solving the 3x3 system in N K.

    Rows (t_i x gamma_i)^T (N K) = rho_i g_i^2 kappa_i (G = 1) plus
    T^T (N K) = 0.  Returns (K, N, B); raises ZeroCurvature (with K
    attached) when ||N K|| is below threshold.
    """
    if g1 <= eps.reg or g2 <= eps.reg:
        raise StationaryImagePoint("image speed vanishes")
    A = np.vstack([cross(m1.t, m1.gamma), cross(m2.t, m2.gamma), np.asarray(T, dtype=float)])
    b = np.array([rho1 * g1**2 * m1.kappa, rho2 * g2**2 * m2.kappa, 0.0])
    NK = solve3_full_pivot(A, b, eps=eps)
    K = norm(NK)
    resid_T = abs(float(np.dot(NK, T)))
    assert resid_T <= 1e-10 * max(1.0, K)
    if K <= eps.curv:
        raise ZeroCurvature("reconstructed curvature below threshold", K=K)
    N = NK / K
    B = cross(np.asarray(T, dtype=float), N)
    return K, N, B


def reconstruct_torsion(
    m1: ViewMeasurement,
    m2: ViewMeasurement,
    T,
    N,
    B,
    K,
    rho1,
    rho2,
    g1,
    g2,
    gprime1,
    gprime2,
    eps: Eps = EPS,
):
    """Torsion and curvature derivative from the 3x3 system in tau_tilde.

    Rows (t_i x gamma_i)^T tau_tilde = 3 g_i^2 kappa_i (e3_i.T)
        + rho_i (3 g_i g_i' kappa_i + g_i^3 kappadot_i)  (G = 1),
    plus T^T tau_tilde = 0; then tau = tau_tilde.B / K, Kdot = tau_tilde.N.
    Returns (tau, Kdot, t_residual) with t_residual = tau_tilde.T.
    """
    if K <= eps.curv:
        raise ZeroCurvature("torsion undefined at zero curvature", K=K)
    A = np.vstack([cross(m1.t, m1.gamma), cross(m2.t, m2.gamma), np.asarray(T, dtype=float)])
    rhs = np.array(
        [
            3.0 * g1**2 * m1.kappa * float(np.dot(m1.e3, T))
            + rho1 * (3.0 * g1 * gprime1 * m1.kappa + g1**3 * m1.kappadot),
            3.0 * g2**2 * m2.kappa * float(np.dot(m2.e3, T))
            + rho2 * (3.0 * g2 * gprime2 * m2.kappa + g2**3 * m2.kappadot),
            0.0,
        ]
    )
    tau_tilde = solve3_full_pivot(A, rhs, eps=eps)
    tau = float(np.dot(tau_tilde, B)) / K
    Kdot = float(np.dot(tau_tilde, N))
    return tau, Kdot, float(np.dot(tau_tilde, T))


def _gprime_world(K, N, T, m: ViewMeasurement, rho: float, g: float) -> float:
    """projected_speed_derivative evaluated with world-basis view axes."""
    T_z = float(np.dot(m.e3, T))
    if K == 0.0 or N is None:
        return -2.0 * g * T_z / rho
    nvec = cross(m.t, m.e3)
    corr = float(np.dot(N - float(np.dot(m.e3, N)) * m.gamma, m.t)) * K / rho
    gp = corr - 2.0 * g * T_z / rho
    assert abs(gp - (K * float(np.dot(N, cross(m.gamma, nvec))) / rho - 2.0 * g * T_z / rho)) <= 1e-9 * (
        1.0 + abs(gp)
    )
    return gp


def reconstruct_point(m1: ViewMeasurement, m2: ViewMeasurement, eps: Eps = EPS) -> ReconstructedPoint:
    """Full chain: position, tangent, curvature, torsion, with diagnostics.

    On straight-line data (both kappas numerically zero) the torsion system
    still solves to tau_tilde = 0 and the result carries K = 0, tau = Kdot = 0
    with zero_curvature set and N/B undefined, rather than failing.
    """
    rho1, rho2, Gw, r_tri = triangulate(m1, m2, eps=eps)
    T, th1, th2, sgn = reconstruct_tangent(m1, m2, eps=eps)
    g1 = _view_speed(T, m1, rho1)
    g2 = _view_speed(T, m2, rho2)
    if g1 <= eps.reg or g2 <= eps.reg:
        raise StationaryImagePoint("stationary image point")
    residuals = {"triangulation": r_tri}
    t1_pred = unit(T - float(np.dot(m1.e3, T)) * m1.gamma)
    t2_pred = unit(T - float(np.dot(m2.e3, T)) * m2.gamma)
    residuals["tangent_reprojection"] = max(norm(t1_pred - m1.t), norm(t2_pred - m2.t))
    try:
        K, N, B = reconstruct_curvature(m1, m2, T, rho1, rho2, g1, g2, eps=eps)
        zero_curv = False
    except ZeroCurvature as zc:
        K, N, B = 0.0, None, None
        zero_curv = True
        residuals["nk_norm"] = getattr(zc, "K", 0.0)
    gp1 = _gprime_world(K, N, T, m1, rho1, g1)
    gp2 = _gprime_world(K, N, T, m2, rho2, g2)
    if zero_curv:
        tau, Kdot, t_resid = 0.0, 0.0, 0.0
    else:
        tau, Kdot, t_resid = reconstruct_torsion(
            m1, m2, T, N, B, K, rho1, rho2, g1, g2, gp1, gp2, eps=eps
        )
    residuals["tau_tilde_T"] = t_resid
    frame = Frenet3(T=T, N=N, B=B, G=1.0, K=K, Kdot=Kdot, tau=tau)
    return ReconstructedPoint(
        Gamma_w=Gw,
        rho1=rho1,
        rho2=rho2,
        frame=frame,
        theta1=th1,
        theta2=th2,
        eps_sign=sgn,
        g1=g1,
        g2=g2,
        gprime1=gp1,
        gprime2=gp2,
        residuals=residuals,
        zero_curvature=zero_curv,
    )


def transfer_to_view(
    m1: ViewMeasurement, m2: ViewMeasurement, pose3: CameraPose, eps: Eps = EPS
):
    """Predict the normalized measurement in a third view from two views.

    Reconstructs the point's differential geometry and projects it through
    pose3; returns (ImageCurveSample, ReconstructedPoint) so callers can
    inspect the intermediate residuals.
    """
    rec = reconstruct_point(m1, m2, eps=eps)
    p_cam = pose3.R @ rec.Gamma_w + pose3.t
    if p_cam[2] <= eps.depth:
        raise BehindCamera("transferred point behind the third camera")
    frame_cam = rec.frame.rotated(pose3.R)
    sample = project_curve_sample(SpaceCurveSample(point=p_cam, frame=frame_cam, frame_id="camera"), eps=eps)
    return sample, rec
