"""Differential motion: flows, accelerations, occluding contours, L1."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvg.core import E3, cross, norm, rot_z, skew, unit, vee
from mvg.dataset import (
    default_scene,
    generator_slip_velocity,
    orbit_R_c,
    orbit_derivatives,
    orbit_motion,
    orbit_pose,
    quadric_contour_generator,
    sample_curve,
    track_occluding_point,
)
from mvg.errors import EpipolarDegenerate, FlatSurfacePoint, NonSkew
from mvg.motion import (
    CameraMotion,
    CurveMotionState,
    alpha_from_beta,
    angular_velocity,
    contour_generator_velocity,
    curve_velocity_frenet,
    differential_epipolar_residual,
    fixed_point_flow,
    flow_decomposition,
    frenet_epipolar_residual,
    gamma_st,
    gamma_tt_frenet,
    image_acceleration,
    image_tangent_rate,
    image_velocity,
    l1_residual,
    occluding_flow,
    occluding_gamma_tt,
    point_velocity_camera,
    taylor_pose,
)
from mvg.core import Frenet2

LD = np.longdouble
HS = (1e-2, 1e-3, 1e-4)


def _zero_motion():
    return CameraMotion(Omega=np.zeros(3), V=np.zeros(3))


def _order(hs, errs):
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.maximum(errs, 1e-300)), 1)[0])


@pytest.fixture(scope="module")
def scene():
    return default_scene()


@pytest.fixture(scope="module")
def frame7(scene):
    t0 = scene.orbit.frame_time(7)
    return (
        t0,
        orbit_pose(scene.orbit, t0, scene.intrinsics),
        orbit_motion(scene.orbit, t0),
    )


# ---------------------------------------------------------------------------
# motion model


def test_angular_velocity_cases():
    Om, resid = angular_velocity(skew([0, 0, 1.0]), np.eye(3))
    np.testing.assert_allclose(Om, [0, 0, 1])
    assert resid <= 1e-15
    Om, _ = angular_velocity(np.zeros((3, 3)), np.eye(3))
    np.testing.assert_allclose(Om, 0)
    with pytest.raises(NonSkew):
        angular_velocity(np.eye(3), np.eye(3))


def test_angular_velocity_fd_orbit(scene):
    t0 = scene.orbit.frame_time(4)
    motion = orbit_motion(scene.orbit, t0)
    R0, _ = orbit_R_c(scene.orbit, t0)
    errs = []
    for h in HS:
        Rp, _ = orbit_R_c(scene.orbit, LD(t0) + LD(h), dtype=LD)
        Rm, _ = orbit_R_c(scene.orbit, LD(t0) - LD(h), dtype=LD)
        Om, _ = angular_velocity(((Rp - Rm) / (2 * LD(h))).astype(float), R0)
        errs.append(np.max(np.abs(Om - motion.Omega)))
    assert 1.8 <= _order(HS, errs) <= 2.2


def test_taylor_pose_trivia():
    m = CameraMotion(Omega=np.array([0.1, 0.2, 0.3]), V=np.array([1.0, 2, 3]))
    R, t, c = taylor_pose(m, 0.0)
    np.testing.assert_array_equal(R, np.eye(3))
    np.testing.assert_array_equal(t, 0)
    np.testing.assert_array_equal(c, 0)
    m = CameraMotion(Omega=np.zeros(3), V=np.array([1.0, 0, 0]))
    R, t, c = taylor_pose(m, 0.5)
    np.testing.assert_array_equal(R, np.eye(3))
    np.testing.assert_allclose(t, [0.5, 0, 0])
    np.testing.assert_allclose(c, [-0.5, 0, 0])


def test_taylor_pose_pure_rotation_cubic():
    w = 0.7
    m = CameraMotion(Omega=np.array([0.0, 0, w]), V=np.zeros(3))
    errs = []
    hs = (1e-1, 1e-2, 1e-3)
    for h in hs:
        R, _, _ = taylor_pose(m, h)
        errs.append(np.max(np.abs(R - rot_z(w * h))))
    assert 2.7 <= _order(hs, errs) <= 3.3


def test_taylor_pose_orbit_roundtrip_cubic(scene):
    # exact orbit pose vs its second-order expansion about a frame
    t0 = scene.orbit.frame_time(5)
    motion = orbit_motion(scene.orbit, t0)
    R0, c0 = orbit_R_c(scene.orbit, t0)
    errs_R, errs_c = [], []
    hs = (1e-1, 1e-2, 1e-3)
    for h in hs:
        R1, c1 = orbit_R_c(scene.orbit, t0 + h)
        R_rel_exact = R1 @ R0.T
        c_rel_exact = R0 @ (c1 - c0)
        R_rel, _, c_rel = taylor_pose(motion, h)
        errs_R.append(np.max(np.abs(R_rel - R_rel_exact)))
        errs_c.append(np.max(np.abs(c_rel - c_rel_exact)))
    assert 2.7 <= _order(hs, errs_R) <= 3.3
    assert 2.7 <= _order(hs, errs_c) <= 3.3


def test_point_velocity_camera():
    np.testing.assert_array_equal(
        point_velocity_camera([1, 2, 3], None, Omega=np.zeros(3), V=np.zeros(3)), 0
    )
    np.testing.assert_allclose(
        point_velocity_camera([1, 2, 3], np.zeros(3), Omega=np.zeros(3), V=np.array([1.0, 0, 0])),
        [1, 0, 0],
    )


def test_point_velocity_camera_fd(scene):
    # camera-frame coordinates of a fixed world point along the orbit
    t0 = scene.orbit.frame_time(3)
    motion = orbit_motion(scene.orbit, t0)
    p = np.array([0.4, -0.1, 0.6])
    R0, c0 = orbit_R_c(scene.orbit, t0)
    vel = point_velocity_camera(R0 @ (p - c0), np.zeros(3), Omega=motion.Omega, V=motion.V)
    errs = []
    for h in HS:
        Rp, cp = orbit_R_c(scene.orbit, LD(t0) + LD(h), dtype=LD)
        Rm, cm = orbit_R_c(scene.orbit, LD(t0) - LD(h), dtype=LD)
        fd = ((Rp @ (np.asarray(p, LD) - cp) - Rm @ (np.asarray(p, LD) - cm)) / (2 * LD(h))).astype(float)
        errs.append(np.max(np.abs(fd - vel)))
    assert 1.8 <= _order(HS, errs) <= 2.2


# ---------------------------------------------------------------------------
# image velocity / acceleration


def test_image_velocity_hand_cases():
    st0 = CurveMotionState(gamma=np.array([0.0, 0, 1.0]), rho=2.0, kind="fixed")
    gt, rt = image_velocity(st0, _zero_motion())
    np.testing.assert_array_equal(gt, 0)
    assert rt == 0.0
    gt, rt = image_velocity(st0, CameraMotion(Omega=np.zeros(3), V=np.array([1.0, 0, 0])))
    np.testing.assert_allclose(gt, [0.5, 0, 0])
    assert rt == 0.0
    # motion along the ray is invisible but changes depth
    st1 = CurveMotionState(
        gamma=np.array([0.0, 0, 1.0]), rho=2.0, Gw_t=np.array([0.0, 0, 1.0]), kind="nonrigid"
    )
    gt, rt = image_velocity(st1, _zero_motion())
    np.testing.assert_allclose(gt, 0, atol=1e-15)
    assert rt == pytest.approx(1.0)


def test_image_velocity_zero_z_exact(frame7):
    _, pose, motion = frame7
    st0 = CurveMotionState(gamma=np.array([0.3, -0.2, 1.0]), rho=7.0, kind="fixed")
    gt, _ = image_velocity(st0, motion)
    gtt, _ = image_acceleration(st0, motion)
    assert gt[2] == 0.0 and gtt[2] == 0.0


def test_image_acceleration_zero():
    st0 = CurveMotionState(gamma=np.array([0.1, 0.2, 1.0]), rho=3.0, kind="fixed")
    gtt, rtt = image_acceleration(st0, _zero_motion())
    np.testing.assert_array_equal(gtt, 0)
    assert rtt == 0.0


def test_image_acceleration_translation_fd():
    # fixed point under pure constant translation
    p = np.array([0.2, 0.1, 4.0])
    V = np.array([0.8, -0.3, 0.5])
    motion = CameraMotion(Omega=np.zeros(3), V=V)

    def traj(dt):
        # c(t) = -transl(t) with R = I: camera coords p - c = p + V t... here
        # transl(t) = V t, camera coords = p + transl
        q = np.asarray(p, LD) + np.asarray(V, LD) * dt
        return q / q[2]

    st0 = CurveMotionState(gamma=(p / p[2]).copy(), rho=float(p[2]), kind="fixed")
    gt, _ = image_velocity(st0, motion)
    gtt, _ = image_acceleration(st0, motion)
    errs_v, errs_a = [], []
    for h in HS:
        hl = LD(h)
        errs_v.append(float(np.max(np.abs(((traj(hl) - traj(-hl)) / (2 * hl)).astype(float) - gt))))
        errs_a.append(
            float(np.max(np.abs(((traj(hl) - 2 * traj(LD(0)) + traj(-hl)) / hl**2).astype(float) - gtt)))
        )
    assert 1.8 <= _order(HS, errs_v) <= 2.2
    assert 1.8 <= _order(HS, errs_a) <= 2.2


def test_moving_point_velocity_acceleration_fd(scene):
    # nonrigid 3D point under full orbit motion
    t0 = scene.orbit.frame_time(6)
    motion = orbit_motion(scene.orbit, t0)

    def Gw(t):
        # analytic moving point
        return np.array(
            [0.3 * np.sin(t), -0.2 + 0.1 * t, 0.4 + 0.05 * t * t], dtype=LD
        )

    def traj(dt):
        R, c = orbit_R_c(scene.orbit, LD(t0) + dt, dtype=LD)
        q = R @ (Gw(LD(t0) + dt) - c)
        return q / q[2]

    R0, c0 = orbit_R_c(scene.orbit, t0)
    p_cam = R0 @ (Gw(LD(t0)).astype(float) - c0)
    gamma = p_cam / p_cam[2]
    gamma[2] = 1.0
    Gw_t_w = np.array([0.3 * np.cos(t0), 0.1, 0.1 * t0])
    Gw_tt_w = np.array([-0.3 * np.sin(t0), 0.0, 0.1])
    st0 = CurveMotionState(
        gamma=gamma,
        rho=float(p_cam[2]),
        Gw_t=R0 @ Gw_t_w,  # world velocity in the reference (camera) frame
        Gw_tt=R0 @ Gw_tt_w,
        kind="nonrigid",
    )
    gt, rho_t = image_velocity(st0, motion)
    gtt, _ = image_acceleration(st0, motion)
    errs_v, errs_a = [], []
    for h in HS:
        hl = LD(h)
        errs_v.append(float(np.max(np.abs(((traj(hl) - traj(-hl)) / (2 * hl)).astype(float) - gt))))
        errs_a.append(
            float(np.max(np.abs(((traj(hl) - 2 * traj(LD(0)) + traj(-hl)) / hl**2).astype(float) - gtt)))
        )
    assert 1.8 <= _order(HS, errs_v) <= 2.2
    assert 1.8 <= _order(HS, errs_a) <= 2.2


def test_fixed_point_flow_hand_cases():
    gt = fixed_point_flow(
        np.array([1.0, 0, 1.0]), 5.0, CameraMotion(Omega=np.array([0.0, 0, 1.0]), V=np.zeros(3))
    )
    np.testing.assert_allclose(gt, [0, 1, 0], atol=1e-15)
    rho = 2.5
    u, v = 0.3, -0.4
    gt = fixed_point_flow(
        np.array([u, v, 1.0]), rho, CameraMotion(Omega=np.zeros(3), V=np.array([0.0, 0, 1.0]))
    )
    np.testing.assert_allclose(gt, [-u / rho, -v / rho, 00.0], atol=1e-15)
    np.testing.assert_array_equal(fixed_point_flow(np.array([u, v, 1.0]), rho, _zero_motion()), 0)


# ---------------------------------------------------------------------------
# decomposition / epipolar identities


def test_flow_decomposition_matrices():
    A, B = flow_decomposition(np.array([0.0, 0, 1.0]))
    np.testing.assert_array_equal(A, [[1, 0, 0], [0, 1, 0], [0, 0, 0]])
    np.testing.assert_array_equal(B, [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_flow_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    gamma = np.array([*rng.uniform(-1, 1, 2), 1.0])
    rho = rng.uniform(0.3, 20.0)
    motion = CameraMotion(Omega=rng.normal(size=3), V=rng.normal(size=3))
    A, B = flow_decomposition(gamma)
    lhs = A @ motion.V / rho + B @ motion.Omega
    np.testing.assert_allclose(lhs, fixed_point_flow(gamma, rho, motion), atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_differential_epipolar_identity(seed):
    rng = np.random.default_rng(seed)
    gamma = np.array([*rng.uniform(-1, 1, 2), 1.0])
    rho = rng.uniform(0.3, 20.0)
    motion = CameraMotion(Omega=rng.normal(size=3), V=rng.normal(size=3))
    gt = fixed_point_flow(gamma, rho, motion)
    assert abs(differential_epipolar_residual(gamma, gt, motion)) <= 1e-12


def test_differential_epipolar_perturbation_sign():
    # perturbing gamma_t by +x with V = +y gives residual +0.01 at gamma = e3
    # (V x gamma = y x z = +x, so the perturbation projects positively)
    gamma = np.array([0.0, 0, 1.0])
    motion = CameraMotion(Omega=np.zeros(3), V=np.array([0.0, 1.0, 0.0]))
    gt = fixed_point_flow(gamma, 2.0, motion) + np.array([0.01, 0, 0])
    r = differential_epipolar_residual(gamma, gt, motion)
    assert r == pytest.approx(0.01, abs=1e-15)
    assert r > 0


# ---------------------------------------------------------------------------
# Frenet-frame velocities


def _frenet_for(gamma, T_cam):
    t = unit(T_cam - T_cam[2] * gamma)
    t[2] = 0.0
    return Frenet2(t=t, n=cross(t, E3), g=1.0, kappa=0.0)


def test_curve_velocity_frenet_zero():
    st0 = CurveMotionState(gamma=np.array([0.1, 0.2, 1.0]), rho=3.0, kind="fixed")
    f2 = _frenet_for(st0.gamma, np.array([0.3, 0.8, 0.52]))
    assert curve_velocity_frenet(st0, f2, _zero_motion()) == (0.0, 0.0)


def test_curve_velocity_frenet_matches_flow(scene, frame7):
    _, pose, motion = frame7
    worst = 0.0
    for curve in scene.curves:
        for sm in sample_curve(curve)[::29]:
            p_cam = pose.R @ sm.point + pose.t
            gamma = p_cam / p_cam[2]
            gamma[2] = 1.0
            st0 = CurveMotionState(gamma=gamma, rho=float(p_cam[2]), kind="fixed")
            f2 = _frenet_for(gamma, pose.R @ sm.frame.T)
            alpha, beta = curve_velocity_frenet(st0, f2, motion)
            gt, _ = image_velocity(st0, motion)
            worst = max(worst, norm(alpha * f2.t + beta * f2.n - gt))
    assert worst <= 1e-12


def test_curve_velocity_frenet_rigid_specialization(frame7):
    # explicit R = I, transl = 0 equals the default t = 0 shortcut
    _, _, motion = frame7
    st0 = CurveMotionState(gamma=np.array([0.2, -0.1, 1.0]), rho=6.0, kind="fixed")
    f2 = _frenet_for(st0.gamma, np.array([0.1, 0.9, 0.42]))
    a1, b1 = curve_velocity_frenet(st0, f2, motion)
    a2, b2 = curve_velocity_frenet(st0, f2, motion, R=np.eye(3), transl=np.zeros(3))
    assert a1 == pytest.approx(a2, abs=1e-15) and b1 == pytest.approx(b2, abs=1e-15)


def test_curve_velocity_frenet_fd_oracle(scene):
    # alpha, beta from tracked projections at fixed space parameter
    t0 = scene.orbit.frame_time(9)
    motion = orbit_motion(scene.orbit, t0)
    sm = sample_curve(scene.curves[4])[37]

    def gamma_at(dt):
        R, c = orbit_R_c(scene.orbit, LD(t0) + dt, dtype=LD)
        q = R @ (np.asarray(sm.point, LD) - c)
        return q / q[2]

    R0, c0 = orbit_R_c(scene.orbit, t0)
    p_cam = R0 @ (sm.point - c0)
    gamma = p_cam / p_cam[2]
    gamma[2] = 1.0
    st0 = CurveMotionState(gamma=gamma, rho=float(p_cam[2]), kind="fixed")
    f2 = _frenet_for(gamma, R0 @ sm.frame.T)
    alpha, beta = curve_velocity_frenet(st0, f2, motion)
    errs_a, errs_b = [], []
    for h in HS:
        fd = ((gamma_at(LD(h)) - gamma_at(-LD(h))) / (2 * LD(h))).astype(float)
        errs_a.append(abs(float(np.dot(fd, f2.t)) - alpha))
        errs_b.append(abs(float(np.dot(fd, f2.n)) - beta))
    assert 1.8 <= _order(HS, errs_a) <= 2.2
    assert 1.8 <= _order(HS, errs_b) <= 2.2


def test_alpha_from_beta(frame7):
    _, pose, motion = frame7
    st0 = CurveMotionState(gamma=np.array([0.25, -0.15, 1.0]), rho=8.0, kind="fixed")
    f2 = _frenet_for(st0.gamma, np.array([0.5, 0.7, 0.51]))
    alpha, beta = curve_velocity_frenet(st0, f2, motion)
    assert alpha_from_beta(beta, st0.gamma, f2.t, f2.n, motion) == pytest.approx(alpha, abs=1e-10)
    # V in the tangent plane gamma x t: degenerate
    gxt = cross(st0.gamma, f2.t)
    V_deg = cross(gxt, np.array([0.0, 0, 1.0]))  # orthogonal to gxt
    with pytest.raises(EpipolarDegenerate):
        alpha_from_beta(beta, st0.gamma, f2.t, f2.n, CameraMotion(Omega=np.zeros(3), V=V_deg))


def test_alpha_from_beta_pure_translation():
    # Omega = 0: alpha = -beta (V.(g x n))/(V.(g x t))
    gamma = np.array([0.1, 0.3, 1.0])
    t = unit(np.array([0.8, 0.6, 0.0]))
    t[2] = 0.0
    n = cross(t, E3)
    V = np.array([1.0, -0.5, 0.3])
    motion = CameraMotion(Omega=np.zeros(3), V=V)
    beta = 0.37
    expected = -beta * float(np.dot(V, cross(gamma, n))) / float(np.dot(V, cross(gamma, t)))
    assert alpha_from_beta(beta, gamma, t, n, motion) == pytest.approx(expected, abs=1e-14)


def test_frenet_epipolar_residual(frame7):
    _, _, motion = frame7
    st0 = CurveMotionState(gamma=np.array([0.2, 0.1, 1.0]), rho=5.0, kind="fixed")
    f2 = _frenet_for(st0.gamma, np.array([0.3, 0.7, 0.648]))
    alpha, beta = curve_velocity_frenet(st0, f2, motion)
    assert abs(frenet_epipolar_residual(alpha, beta, st0.gamma, f2.t, f2.n, motion)) <= 1e-12
    assert abs(frenet_epipolar_residual(alpha, beta + 0.1, st0.gamma, f2.t, f2.n, motion)) > 1e-6
    # pure rotation: constraint is vacuous
    rot_only = CameraMotion(Omega=np.array([0.3, -0.2, 0.5]), V=np.zeros(3))
    assert frenet_epipolar_residual(1.23, -0.7, st0.gamma, f2.t, f2.n, rot_only) == 0.0


# ---------------------------------------------------------------------------
# gamma_st and Frenet acceleration


def test_gamma_st_zero_motion():
    st0 = CurveMotionState(gamma=np.array([0.1, 0.2, 1.0]), rho=3.0, kind="fixed")
    out = gamma_st(st0, np.array([0.5, 0.1, 0.0]), 0.3, _zero_motion())
    np.testing.assert_array_equal(out, 0)


def test_gamma_st_slanted_line_hand_case():
    # 3D line (s, 0, 2 + s/2) under lateral translation V = (1, 0, 0):
    # gamma_t(s) = V/rho(s), so gamma_st = -V rho_s / rho^2
    V = np.array([1.0, 0, 0])
    motion = CameraMotion(Omega=np.zeros(3), V=V)
    for s in (0.0, 1.0):
        p = np.array([s, 0.0, 2.0 + 0.5 * s])
        rho = p[2]
        gamma = p / rho
        gamma[2] = 1.0
        d1 = np.array([1.0, 0, 0.5])
        gamma_s = d1 / rho - p * (0.5 / rho**2)
        gamma_s[2] = 0.0
        st0 = CurveMotionState(gamma=gamma, rho=float(rho), kind="fixed")
        out = gamma_st(st0, gamma_s, 0.5, motion)
        np.testing.assert_allclose(out, -V * 0.5 / rho**2, atol=1e-15)


def test_gamma_st_mixed_partial_oracle(scene):
    from mvg.dataset import evaluate_curve, project_curve_derivatives

    t0 = scene.orbit.frame_time(7)
    pose = orbit_pose(scene.orbit, t0, scene.intrinsics)
    motion = orbit_motion(scene.orbit, t0)
    c = scene.curves[0]
    s0 = 0.8

    def gamma_t_at(s):
        p, _, _, _ = evaluate_curve(c, s)
        p_cam = pose.R @ p + pose.t
        g = p_cam / p_cam[2]
        g[2] = 1.0
        return fixed_point_flow(g, float(p_cam[2]), motion)

    p, d1, d2, d3 = evaluate_curve(c, s0)
    p_cam = pose.R @ p + pose.t
    g0, g1, _, _ = project_curve_derivatives(p_cam, pose.R @ d1, pose.R @ d2, pose.R @ d3)
    st0 = CurveMotionState(gamma=g0, rho=float(p_cam[2]), kind="fixed")
    closed = gamma_st(st0, g1, float((pose.R @ d1)[2]), motion)
    errs = []
    for h in HS:
        fd = (gamma_t_at(s0 + h) - gamma_t_at(s0 - h)) / (2 * h)
        errs.append(norm(fd - closed))
    assert 1.8 <= _order(HS, errs) <= 2.2


def test_gamma_tt_frenet_matches_acceleration(frame7):
    _, _, motion = frame7
    rng = np.random.default_rng(3)
    for _ in range(25):
        gamma = np.array([*rng.uniform(-0.4, 0.4, 2), 1.0])
        rho = rng.uniform(2, 12)
        T = unit(rng.normal(size=3))
        if norm(T - T[2] * gamma) < 1e-3:
            continue
        st0 = CurveMotionState(gamma=gamma, rho=rho, kind="fixed")
        f2 = _frenet_for(gamma, T)
        alpha, beta = curve_velocity_frenet(st0, f2, motion)
        ct, cn = gamma_tt_frenet(st0, f2, motion, alpha, beta)
        gtt, _ = image_acceleration(st0, motion)
        assert ct == pytest.approx(float(np.dot(f2.t, gtt)), abs=1e-12)
        assert cn == pytest.approx(float(np.dot(f2.n, gtt)), abs=1e-12)


def test_gamma_tt_frenet_zero():
    st0 = CurveMotionState(gamma=np.array([0.1, 0.2, 1.0]), rho=3.0, kind="fixed")
    f2 = _frenet_for(st0.gamma, np.array([0.3, 0.8, 0.52]))
    assert gamma_tt_frenet(st0, f2, _zero_motion(), 0.0, 0.0) == (0.0, 0.0)


def test_gamma_st_deforming_branch(scene):
    # analytic deforming curve: Gamma(s, t) = base(s) + t w(s), camera on the
    # orbit; the nonrigid gamma_st matches the mixed partial of gamma_t
    t0 = scene.orbit.frame_time(6)
    motion = orbit_motion(scene.orbit, t0)
    R0, c0 = orbit_R_c(scene.orbit, t0)

    def base(s):
        return np.array([0.8 * np.cos(s), 0.8 * np.sin(s), 0.3 * s])

    def base_s(s):
        return np.array([-0.8 * np.sin(s), 0.8 * np.cos(s), 0.3])

    def w(s):
        return np.array([0.2 * np.sin(2 * s), -0.1 * s, 0.15 * np.cos(s)])

    def w_s(s):
        return np.array([0.4 * np.cos(2 * s), -0.1, -0.15 * np.sin(s)])

    def gamma_t_at(s):
        # instantaneous image velocity of the deforming point at parameter s
        p_cam = R0 @ (base(s) - c0)
        g = p_cam / p_cam[2]
        g[2] = 1.0
        st = CurveMotionState(
            gamma=g, rho=float(p_cam[2]), Gw_t=R0 @ w(s), kind="nonrigid"
        )
        return image_velocity(st, motion)[0]

    s0 = 0.6
    p_cam = R0 @ (base(s0) - c0)
    gamma = p_cam / p_cam[2]
    gamma[2] = 1.0
    rho = float(p_cam[2])
    d1 = R0 @ base_s(s0)
    gamma_s = d1 / rho - p_cam * (d1[2] / rho**2)
    gamma_s[2] = 0.0
    st0 = CurveMotionState(gamma=gamma, rho=rho, Gw_t=R0 @ w(s0), kind="nonrigid")
    closed = gamma_st(st0, gamma_s, float(d1[2]), motion, Gw_st=R0 @ w_s(s0))
    errs = []
    for h in HS:
        fd = (gamma_t_at(s0 + h) - gamma_t_at(s0 - h)) / (2 * h)
        errs.append(norm(fd - closed))
    assert 1.8 <= _order(HS, errs) <= 2.2


def test_gamma_tt_frenet_nonrigid(frame7):
    # the Frenet components hold for arbitrary deforming states as well
    _, _, motion = frame7
    rng = np.random.default_rng(17)
    for _ in range(15):
        gamma = np.array([*rng.uniform(-0.4, 0.4, 2), 1.0])
        rho = rng.uniform(2, 12)
        T = unit(rng.normal(size=3))
        if norm(T - T[2] * gamma) < 1e-3:
            continue
        st0 = CurveMotionState(
            gamma=gamma, rho=rho, Gw_t=rng.normal(size=3), Gw_tt=rng.normal(size=3),
            kind="nonrigid",
        )
        f2 = _frenet_for(gamma, T)
        gt, _ = image_velocity(st0, motion)
        alpha, beta = float(np.dot(gt, f2.t)), float(np.dot(gt, f2.n))
        a2, b2 = curve_velocity_frenet(st0, f2, motion)
        assert a2 == pytest.approx(alpha, abs=1e-12) and b2 == pytest.approx(beta, abs=1e-12)
        ct, cn = gamma_tt_frenet(st0, f2, motion, alpha, beta)
        gtt, _ = image_acceleration(st0, motion)
        assert ct == pytest.approx(float(np.dot(f2.t, gtt)), abs=1e-11)
        assert cn == pytest.approx(float(np.dot(f2.n, gtt)), abs=1e-11)


def test_curve_velocity_frenet_any_t(scene):
    # the any-t form with nonzero transl: world frame fixed at a reference
    # frame, velocities evaluated at a later time on the orbit.  This is the
    # only path exercising the -(Omega x transl)/rho term.
    t_ref = scene.orbit.frame_time(4)
    dt = 0.35
    t_eval = t_ref + dt
    R_ref, c_ref = orbit_R_c(scene.orbit, t_ref)

    p_world_abs = np.array([0.5, -0.3, 0.4])
    p = R_ref @ (p_world_abs - c_ref)  # fixed point in the reference frame
    T_abs = unit(np.array([0.2, 0.9, 0.38]))
    T_ref = R_ref @ T_abs

    def rel_R_c(t):
        R, c = orbit_R_c(scene.orbit, float(t))
        return R @ R_ref.T, R_ref @ (c - c_ref)

    # exact relative-pose derivatives at t_eval via the orbit's closed forms
    R_a, R_t_a, _, c_a, c_t_a, _ = orbit_derivatives(scene.orbit, t_eval)
    R_rel = R_a @ R_ref.T
    c_rel = R_ref @ (c_a - c_ref)
    transl_rel = -(R_rel @ c_rel)
    Omega = vee((R_t_a @ R_ref.T) @ R_rel.T)
    c_rel_t = R_ref @ c_t_a
    V = cross(Omega, transl_rel) - R_rel @ c_rel_t
    motion_t = CameraMotion(Omega=Omega, V=V)

    def gamma_at(t):
        Rr, cr = rel_R_c(t)
        q = Rr @ (p - cr)
        return q / q[2]

    q = R_rel @ (p - c_rel)
    gamma = q / q[2]
    gamma[2] = 1.0
    rho = float(q[2])
    T_cam = R_rel @ T_ref
    tvec = unit(T_cam - T_cam[2] * gamma)
    tvec[2] = 0.0
    f2 = Frenet2(t=tvec, n=cross(tvec, E3), g=1.0, kappa=0.0)
    st0 = CurveMotionState(gamma=gamma, rho=rho, kind="fixed")
    alpha, beta = curve_velocity_frenet(st0, f2, motion_t, R=R_rel, transl=transl_rel)
    errs = []
    for h in HS:
        fd = ((gamma_at(LD(t_eval) + LD(h)) - gamma_at(LD(t_eval) - LD(h))) / (2 * LD(h))).astype(float)
        errs.append(abs(float(np.dot(fd, f2.t)) - alpha) + abs(float(np.dot(fd, f2.n)) - beta))
    assert 1.8 <= _order(HS, errs) <= 2.2
    # sanity: the transl term genuinely participates away from t = 0
    a0, b0 = curve_velocity_frenet(st0, f2, motion_t, R=R_rel, transl=None)
    assert abs(a0 - alpha) + abs(b0 - beta) > 1e-6


def test_point_velocity_camera_any_t(scene):
    # Gamma_t = [Omega]^ Gamma + R Gw_t + V - [Omega]^ transl away from t = 0
    t_ref = scene.orbit.frame_time(2)
    t_eval = t_ref + 0.4
    R_ref, c_ref = orbit_R_c(scene.orbit, t_ref)
    p = np.array([0.3, 0.2, -0.1])  # in the reference frame

    def coords_at(t):
        R, c = orbit_R_c(scene.orbit, float(t))
        Rr = R @ R_ref.T
        cr = R_ref @ (c - c_ref)
        return Rr @ (p - cr)

    R_a, R_t_a, _, c_a, c_t_a, _ = orbit_derivatives(scene.orbit, t_eval)
    R_rel = R_a @ R_ref.T
    transl_rel = -(R_rel @ (R_ref @ (c_a - c_ref)))
    Omega = vee((R_t_a @ R_ref.T) @ R_rel.T)
    V = cross(Omega, transl_rel) - R_rel @ (R_ref @ c_t_a)
    vel = point_velocity_camera(
        coords_at(t_eval), np.zeros(3), R=R_rel, Omega=Omega, V=V, transl=transl_rel
    )
    errs = []
    for h in HS:
        fd = ((coords_at(LD(t_eval) + LD(h)) - coords_at(LD(t_eval) - LD(h))) / (2 * LD(h))).astype(float)
        errs.append(float(np.max(np.abs(fd - vel))))
    assert 1.8 <= _order(HS, errs) <= 2.2


# ---------------------------------------------------------------------------
# occluding contours


def _sphere_setup(scene, frame=7):
    q = scene.quadrics[0]
    t0 = scene.orbit.frame_time(frame)
    pose = orbit_pose(scene.orbit, t0, scene.intrinsics)
    motion = orbit_motion(scene.orbit, t0)
    return q, t0, pose, motion


def test_contour_generator_velocity_sphere(scene):
    q, t0, pose, motion = _sphere_setup(scene)
    _, _, _, cc, c_t, _ = orbit_derivatives(scene.orbit, t0)
    for sm, Kt, N_w in quadric_contour_generator(q, pose, 12):
        assert Kt == pytest.approx(1.0 / q.semi_axes[0], abs=1e-12)
        p_cam = pose.R @ sm.point + pose.t
        gamma = p_cam / p_cam[2]
        gamma[2] = 1.0
        rho = float(p_cam[2])
        T_cam = pose.R @ sm.frame.T
        t = unit(T_cam - T_cam[2] * gamma)
        t[2] = 0.0
        Gw_t = contour_generator_velocity(gamma, rho, motion.V, t, Kt)
        # ray-parallel by construction
        assert norm(cross(Gw_t, gamma)) <= 1e-12 * max(norm(Gw_t), 1e-30)
        # independent implicit-differentiation oracle
        np.testing.assert_allclose(Gw_t, pose.R @ generator_slip_velocity(q, sm.point, cc, c_t), atol=1e-12)


def test_contour_generator_velocity_degenerate():
    with pytest.raises(FlatSurfacePoint):
        contour_generator_velocity(
            np.array([0.0, 0, 1.0]), 2.0, np.array([1.0, 0, 0]), np.array([0.0, 1, 0]), 0.0
        )
    # camera sliding in the tangent plane: V.(gamma x t) = 0 -> zero slip
    out = contour_generator_velocity(
        np.array([0.0, 0, 1.0]), 2.0, np.array([0.0, 1.0, 0]), np.array([0.0, 1, 0]), 1.0
    )
    np.testing.assert_allclose(out, 0, atol=1e-15)


def test_occluding_flow_is_fixed_flow(frame7):
    _, _, motion = frame7
    gamma = np.array([0.2, -0.3, 1.0])
    a = occluding_flow(gamma, 4.0, motion)
    b = fixed_point_flow(gamma, 4.0, motion)
    assert np.array_equal(a, b)
    np.testing.assert_array_equal(occluding_flow(gamma, 4.0, _zero_motion()), 0)


def test_occluding_cancellation(scene):
    # image_velocity with the true ray-parallel slip equals the fixed flow
    for qi in (0, 1):
        q = scene.quadrics[qi]
        t0 = scene.orbit.frame_time(5)
        pose = orbit_pose(scene.orbit, t0, scene.intrinsics)
        motion = orbit_motion(scene.orbit, t0)
        for sm, Kt, _ in quadric_contour_generator(q, pose, 16):
            p_cam = pose.R @ sm.point + pose.t
            gamma = p_cam / p_cam[2]
            gamma[2] = 1.0
            rho = float(p_cam[2])
            T_cam = pose.R @ sm.frame.T
            t = unit(T_cam - T_cam[2] * gamma)
            t[2] = 0.0
            Gw_t = contour_generator_velocity(gamma, rho, motion.V, t, Kt)
            st0 = CurveMotionState(gamma=gamma, rho=rho, Gw_t=Gw_t, kind="occluding", Kt=Kt)
            gv, _ = image_velocity(st0, motion)
            assert norm(gv - fixed_point_flow(gamma, rho, motion)) <= 1e-12


def test_occluding_flow_and_gamma_tt_fd(scene):
    # centered differences of the exactly tracked apparent contour
    q, t0, pose, motion = _sphere_setup(scene)
    sm, Kt, _ = quadric_contour_generator(q, pose, 8)[3]
    X = sm.point
    p_cam = pose.R @ X + pose.t
    gamma = p_cam / p_cam[2]
    gamma[2] = 1.0
    rho = float(p_cam[2])
    T_cam = pose.R @ sm.frame.T
    t = unit(T_cam - T_cam[2] * gamma)
    t[2] = 0.0
    Gw_t = contour_generator_velocity(gamma, rho, motion.V, t, Kt)
    st0 = CurveMotionState(gamma=gamma, rho=rho, Gw_t=Gw_t, kind="occluding", Kt=Kt)
    gv, rho_t = image_velocity(st0, motion)
    gtt = occluding_gamma_tt(st0, motion, gv, rho_t)

    def traj(dt):
        dtf = float(dt)
        Xh = track_occluding_point(q, scene.orbit, t0, X, t0 + dtf, dtype=LD) if dtf else np.asarray(X, LD)
        R, c = orbit_R_c(scene.orbit, LD(t0) + dt, dtype=LD)
        v = R @ (Xh - c)
        return v / v[2]

    errs_v, errs_a = [], []
    for h in HS:
        hl = LD(h)
        errs_v.append(float(np.max(np.abs(((traj(hl) - traj(-hl)) / (2 * hl)).astype(float) - gv))))
        errs_a.append(
            float(np.max(np.abs(((traj(hl) - 2 * traj(LD(0)) + traj(-hl)) / hl**2).astype(float) - gtt)))
        )
    assert 1.8 <= _order(HS, errs_v) <= 2.2
    assert 1.8 <= _order(HS, errs_a) <= 2.2


def test_occluding_gamma_tt_flat_limit(frame7):
    # Kt -> inf means zero slip: reduces to the fixed-point acceleration
    _, _, motion = frame7
    gamma = np.array([0.15, -0.1, 1.0])
    st0 = CurveMotionState(gamma=gamma, rho=6.0, Gw_t=np.zeros(3), kind="occluding", Kt=1e9)
    out = occluding_gamma_tt(st0, motion)
    fixed = CurveMotionState(gamma=gamma, rho=6.0, kind="fixed")
    gtt, _ = image_acceleration(fixed, motion)
    np.testing.assert_allclose(out, gtt, atol=1e-12)
    np.testing.assert_array_equal(
        occluding_gamma_tt(
            CurveMotionState(gamma=gamma, rho=6.0, kind="occluding"), _zero_motion()
        ),
        0,
    )


# ---------------------------------------------------------------------------
# generalized L1


def _l1_inputs(scene, frame, curve_idx, s):
    from mvg.dataset import evaluate_curve, project_curve_derivatives

    t0 = scene.orbit.frame_time(frame)
    pose = orbit_pose(scene.orbit, t0, scene.intrinsics)
    motion = orbit_motion(scene.orbit, t0)
    c = scene.curves[curve_idx]
    p, d1, d2, d3 = evaluate_curve(c, s)
    p_cam = pose.R @ p + pose.t
    g0, g1, _, _ = project_curve_derivatives(p_cam, pose.R @ d1, pose.R @ d2, pose.R @ d3)
    gamma = g0
    rho = float(p_cam[2])
    gsp = float(norm(g1))
    t = g1 / gsp
    n = cross(t, E3)
    st0 = CurveMotionState(gamma=gamma, rho=rho, kind="fixed")
    gt = fixed_point_flow(gamma, rho, motion)
    gtt, _ = image_acceleration(st0, motion)
    gst = gamma_st(st0, g1, float((pose.R @ d1)[2]), motion)
    t_t = image_tangent_rate(gst, t, gsp)
    n_t = cross(t_t, E3)
    beta = float(n @ gt)
    beta_t = float(n_t @ gt + n @ gtt)
    return gamma, t, beta, beta_t, motion, rho, gt, t_t


def test_l1_rigid(scene):
    worst = 0.0
    for ci in range(5):
        c = scene.curves[ci]
        for frac in (0.3, 0.7):
            s = c.s0 + frac * (c.s1 - c.s0)
            gamma, t, beta, beta_t, motion, rho, gt, t_t = _l1_inputs(scene, 7, ci, s)
            _, n_res = l1_residual(gamma, t, beta, beta_t, motion, rho, gt, t_t)
            worst = max(worst, abs(n_res))
    assert worst <= 1e-8


def test_l1_missing_term_detected(scene):
    gamma, t, beta, beta_t, motion, rho, gt, t_t = _l1_inputs(scene, 7, 0, 0.9)
    _, full = l1_residual(gamma, t, beta, beta_t, motion, rho, gt, t_t)
    _, dropped = l1_residual(
        gamma, t, beta, beta_t, motion, rho, gt, t_t, include_correction_term=False
    )
    assert abs(full) <= 1e-10
    assert abs(dropped) > 1e-3


def test_l1_perturbation_sweep(scene):
    gamma, t, beta, beta_t, motion, rho, gt, t_t = _l1_inputs(scene, 7, 4, 0.5)
    vals = []
    for d in (1e-2, 3e-2, 1e-1):
        m = CameraMotion(
            Omega=motion.Omega + np.array([0, 0, d]), V=motion.V,
            Omega_t=motion.Omega_t, V_t=motion.V_t,
        )
        vals.append(abs(l1_residual(gamma, t, beta, beta_t, m, rho, gt, t_t)[1]))
    assert vals[0] < vals[1] < vals[2]


def test_l1_occluding_sphere(scene):
    q, t0, pose, motion = _sphere_setup(scene)
    worst = 0.0
    for sm, Kt, _ in quadric_contour_generator(q, pose, 8):
        p_cam = pose.R @ sm.point + pose.t
        gamma = p_cam / p_cam[2]
        gamma[2] = 1.0
        rho = float(p_cam[2])
        d1w = sm.frame.G * sm.frame.T
        from mvg.dataset import project_curve_derivatives

        g1 = project_curve_derivatives(p_cam, pose.R @ d1w, np.zeros(3), np.zeros(3))[1]
        gsp = float(norm(g1))
        t = g1 / gsp
        n = cross(t, E3)
        Gw_t = contour_generator_velocity(gamma, rho, motion.V, t, Kt)
        st0 = CurveMotionState(gamma=gamma, rho=rho, Gw_t=Gw_t, kind="occluding", Kt=Kt)
        gv, rho_t = image_velocity(st0, motion)
        gtt_o = occluding_gamma_tt(st0, motion, gv, rho_t)
        gst = gamma_st(st0, g1, float((pose.R @ d1w)[2]), motion)
        t_t = image_tangent_rate(gst, t, gsp)
        n_t = cross(t_t, E3)
        beta = float(n @ gv)
        beta_t = float(n_t @ gv + n @ gtt_o)
        _, n_res = l1_residual(
            gamma, t, beta, beta_t, motion, rho, gv, t_t,
            e3_dot_Gw_t=float(Gw_t[2]), contour_kind="occluding",
        )
        worst = max(worst, abs(n_res))
    assert worst <= 1e-6


def test_l1_rejects_nonrigid():
    with pytest.raises(ValueError):
        l1_residual(
            np.array([0.0, 0, 1.0]), np.array([1.0, 0, 0]), 0.1, 0.0,
            _zero_motion(), 2.0, np.zeros(3), np.zeros(3), contour_kind="nonrigid",
        )


def test_state_validation():
    with pytest.raises(ValueError):
        CurveMotionState(gamma=np.array([0.0, 0, 1.0]), rho=1.0, Gw_t=np.array([1.0, 0, 0]), kind="fixed")
    with pytest.raises(ValueError):
        CurveMotionState(
            gamma=np.array([0.0, 0, 1.0]), rho=1.0, Gw_t=np.array([1.0, 0, 0]), kind="occluding"
        )
    st0 = CurveMotionState(
        gamma=np.array([0.0, 0, 1.0]), rho=1.0, Gw_t=np.array([0.0, 0, 0.5]), kind="occluding"
    )
    assert st0.Kt is None
