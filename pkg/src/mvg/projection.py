"""Projecting the differential geometry of a space curve into a single view.

Given Frenet data of a space-curve point in the camera frame, these
operations produce the tangent, curvature and curvature derivative of the
projected image curve, plus the speed ratio linking image and space arc
lengths, and the mapping of image differential geometry through the
intrinsic-parameter matrix.

Third-order operations assume the space curve is parametrized by its arc
length (G = 1); callers with an arbitrary parametrization renormalize first
(Frenet data is intrinsic, so this costs nothing).

Signs follow the package-wide convention n = t x e3 (see mvg.core); the
dual printed forms of the curvature and speed-derivative formulas are
cross-checked by assert (disabled under python -O).

Pure functions; thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    E3,
    EPS,
    Eps,
    Frenet2,
    Frenet3,
    ImagePoint,
    cross,
    norm,
)
from .errors import SingularIntrinsics, StationaryImagePoint, TangentAlongRay


@dataclass(frozen=True)
class SpaceCurveSample:
    """A space-curve point with Frenet data, tagged with its frame."""

    point: np.ndarray
    frame: Frenet3
    frame_id: str = "world"


@dataclass(frozen=True)
class ImageCurveSample:
    """An image-curve point with Frenet data, in normalized or pixel coords."""

    point: ImagePoint
    frame2: Frenet2
    coords: str = "normalized"


def project_tangent(T, gamma: ImagePoint, eps: Eps = EPS):
    """Image tangent and normal from the space tangent: t = (T - T_z g)/|.|.

    Depth-free: only the ray gamma and the unit space tangent T enter.
    """
    T = np.asarray(T, dtype=float)
    g = gamma.gamma
    p = T - T[2] * g
    n_p = norm(p)
    if n_p <= eps.reg:
        raise TangentAlongRay("space tangent aligned with the visual ray")
    t = p / n_p
    t[2] = 0.0
    return t, cross(t, E3)


def speed_ratio(T, gamma: ImagePoint, z: float) -> float:
    """Intrinsic ratio g/G of image to space parametrization speeds.

    g/G = ||T - T_z gamma|| / z.  Returns 0 at a stationary image point.
    """
    T = np.asarray(T, dtype=float)
    return norm(T - T[2] * gamma.gamma) / z


def project_curvature(K, N, gamma: ImagePoint, t, rho, g_over_G, eps: Eps = EPS):
    """Signed image curvature from space curvature.

    kappa = -(G/g)^2 [N^T (gamma x t) / rho] K under n = t x e3; the minus
    sign relative to the raw (gamma x t)-contraction is forced by the
    convention (checked against the (N - N_z gamma) . n form).
    """
    if g_over_G <= eps.reg:
        raise StationaryImagePoint("image speed ratio vanishes")
    N = np.asarray(N, dtype=float)
    g = gamma.gamma
    kappa = -(float(np.dot(N, cross(g, t))) / rho) * K / g_over_G**2
    # dual printed form, convention-free: kappa = (G/g)^2 K (N - N_z gamma).n / rho
    assert (
        abs(kappa - float(np.dot(N - N[2] * g, cross(t, E3))) * K / (rho * g_over_G**2))
        <= 1e-10 * (1.0 + abs(kappa))
    )
    return kappa


def projected_speed_derivative(K, N, T_z, gamma: ImagePoint, t, rho, g):
    """dg/dS: derivative of the image speed w.r.t. space arc length (G = 1).

    Computed as +K N^T (gamma x n) / rho - 2 g T_z / rho (the cross form
    carries a + sign under n = t x e3); cross-checked in debug against the
    (N - N_z gamma)^T t form, which subtracts near-parallel vectors.
    """
    if K == 0.0 or N is None:
        return -2.0 * g * T_z / rho
    N = np.asarray(N, dtype=float)
    gm = gamma.gamma
    n = cross(t, E3)
    gprime = K * float(np.dot(N, cross(gm, n))) / rho - 2.0 * g * T_z / rho
    assert (
        abs(gprime - (float(np.dot(N - N[2] * gm, t)) * K / rho - 2.0 * g * T_z / rho))
        <= 1e-10 * (1.0 + abs(gprime))
    )
    return gprime


def project_curvature_derivative(
    K, Kdot, tau, N, B, gamma: ImagePoint, t, rho, g, gprime, kappa, T_z, eps: Eps = EPS
):
    """Image curvature derivative w.r.t. image arc length (G = 1 convention).

    kappadot = -[Kdot N + K tau B]^T (gamma x t) / (rho g^3)
               - 3 kappa (T_z / (rho g) + gprime / g^2)
    with the leading minus from n = t x e3.  For straight lines (N, B
    undefined) the torsion vector is zero.
    """
    if g <= eps.reg:
        raise StationaryImagePoint("image speed vanishes")
    gm = gamma.gamma
    if N is None or B is None or K == 0.0:
        tau_tilde = np.zeros(3)
    else:
        tau_tilde = Kdot * np.asarray(N, dtype=float) + K * tau * np.asarray(B, dtype=float)
    first = -float(np.dot(tau_tilde, cross(gm, t))) / (rho * g**3)
    return first - 3.0 * kappa * (T_z / (rho * g) + gprime / g**2)


def project_curve_sample(
    sample: SpaceCurveSample, eps: Eps = EPS
) -> ImageCurveSample:
    """Full theorem-route projection of a camera-frame Frenet sample.

    The sample's Frenet data is treated under the arc-length convention
    (G = 1); speeds in the result are w.r.t. space arc length.
    """
    from .core import project

    f = sample.frame
    ip = project(sample.point, eps=eps)
    t, n = project_tangent(f.T, ip, eps=eps)
    g = speed_ratio(f.T, ip, ip.rho)
    if g <= eps.reg:
        raise StationaryImagePoint("projected sample has zero image speed")
    T_z = float(f.T[2])
    if f.K <= eps.curv or f.N is None:
        kappa = 0.0
        gprime = -2.0 * g * T_z / ip.rho
    else:
        kappa = project_curvature(f.K, f.N, ip, t, ip.rho, g, eps=eps)
        gprime = projected_speed_derivative(f.K, f.N, T_z, ip, t, ip.rho, g)
    kappadot = project_curvature_derivative(
        f.K, f.Kdot, f.tau, f.N, f.B, ip, t, ip.rho, g, gprime, kappa, T_z, eps=eps
    )
    f2 = Frenet2(t=t, n=n, g=g, kappa=kappa, kappadot=kappadot, gprime=gprime)
    return ImageCurveSample(point=ip, frame2=f2, coords="normalized")


def intrinsics_transfer(f2: Frenet2, K_im, eps: Eps = EPS) -> Frenet2:
    """Map image differential geometry through gamma_im = K_im gamma.

    Requires the source curve at unit speed (f2.g == 1); the returned g and
    gprime are the target-curve speed and its derivative relative to unit
    source speed.  The inverse mapping is the same function with K_im^{-1}.
    """
    K = np.asarray(K_im, dtype=float)
    if abs(float(np.linalg.det(K))) < 1e-12:
        raise SingularIntrinsics("transfer matrix is singular")
    if abs(f2.g - 1.0) > 1e-9:
        raise ValueError("intrinsics_transfer expects unit-speed input (g = 1)")
    Kt = K @ f2.t
    g_im = norm(Kt)
    t_im = Kt / g_im
    t_im[2] = 0.0
    n_im = cross(t_im, E3)
    gprime_im = f2.kappa * float(np.dot(Kt, K @ f2.n)) / g_im
    kappa_im = float(np.dot(n_im, K @ (f2.kappa * f2.n))) / g_im**2
    third = K @ (-f2.kappa**2 * f2.t + f2.kappadot * f2.n)
    kappadot_im = (float(np.dot(n_im, third)) - 3.0 * g_im * gprime_im * kappa_im) / g_im**3
    return Frenet2(
        t=t_im, n=n_im, g=g_im, kappa=kappa_im, kappadot=kappadot_im, gprime=gprime_im
    )
