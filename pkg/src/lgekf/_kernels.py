"""Numeric kernels shared by the closed-form groups, the INS model and the
fast propagation loops.

Everything here is numba-compatible numpy (see ``_accel``). Conventions:

* SO(3) vectors are rotation vectors (rad); ``skew`` is the cross-product map.
* SE2(3) algebra coordinates are ordered (rotation, velocity, position).
* The INS state is carried as a flat "nav vector" of length 21:
  ``R`` row-major (0:9), ``v`` (9:12), ``p`` (12:15), ``b_f`` (15:18),
  ``b_w`` (18:21). Its tangent space has 15 coordinates ordered
  (rotation, velocity, position, b_f, b_w).
"""

import numpy as np

from ._accel import jit

NAV_SIZE = 21
DOF = 15

INTEGRATOR_TRANSPORT = 0
INTEGRATOR_EULER = 1


# --------------------------------------------------------------------------
# SO(3)
# --------------------------------------------------------------------------


@jit
def skew(w):
    S = np.zeros((3, 3))
    S[0, 1] = -w[2]
    S[0, 2] = w[1]
    S[1, 0] = w[2]
    S[1, 2] = -w[0]
    S[2, 0] = -w[1]
    S[2, 1] = w[0]
    return S


@jit
def norm3(w):
    return np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])


@jit
def so3_coefficients(theta):
    """Return sin(t)/t, (1 - cos t)/t^2 and (t - sin t)/t^3."""
    t2 = theta * theta
    if theta < 1e-6:
        a = 1.0 - t2 / 6.0
    else:
        a = np.sin(theta) / theta
    half = 0.5 * theta
    if half < 1e-8:
        sh = 1.0 - half * half / 6.0
    else:
        sh = np.sin(half) / half
    b = 0.5 * sh * sh
    if theta < 0.1:
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2**3 / 362880.0 + t2**4 / 39916800.0
    else:
        c = (theta - np.sin(theta)) / (theta * t2)
    return a, b, c


@jit
def so3_inverse_coefficient(theta):
    """Return 1/t^2 - cot(t/2)/(2t), the quadratic coefficient of J^-1."""
    t2 = theta * theta
    if theta < 0.1:
        return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2**3 / 1209600.0 + t2**4 / 47900160.0
    half = 0.5 * theta
    return 1.0 / t2 - np.cos(half) / (2.0 * theta * np.sin(half))


@jit
def so3_exp(w):
    theta = norm3(w)
    a, b, _ = so3_coefficients(theta)
    S = skew(w)
    return np.eye(3) + a * S + b * np.dot(S, S)


@jit
def so3_left_jacobian(w):
    theta = norm3(w)
    _, b, c = so3_coefficients(theta)
    S = skew(w)
    return np.eye(3) + b * S + c * np.dot(S, S)


@jit
def so3_right_jacobian(w):
    theta = norm3(w)
    _, b, c = so3_coefficients(theta)
    S = skew(w)
    return np.eye(3) - b * S + c * np.dot(S, S)


@jit
def so3_left_jacobian_inv(w):
    e = so3_inverse_coefficient(norm3(w))
    S = skew(w)
    return np.eye(3) - 0.5 * S + e * np.dot(S, S)


@jit
def so3_right_jacobian_inv(w):
    e = so3_inverse_coefficient(norm3(w))
    S = skew(w)
    return np.eye(3) + 0.5 * S + e * np.dot(S, S)


@jit
def so3_gamma2(w):
    """Second integral of the exponential, sum_k S^k / (k + 2)!."""
    theta = norm3(w)
    t2 = theta * theta
    _, _, c = so3_coefficients(theta)
    if theta < 0.2:
        d = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0 - t2**3 / 3628800.0 + t2**4 / 479001600.0
    else:
        d = (0.5 * t2 + np.cos(theta) - 1.0) / (t2 * t2)
    S = skew(w)
    return 0.5 * np.eye(3) + c * S + d * np.dot(S, S)


@jit
def rotation_angle(R):
    """Angle of a rotation matrix; stable over [0, pi]."""
    cos_t = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    sx = 0.5 * (R[2, 1] - R[1, 2])
    sy = 0.5 * (R[0, 2] - R[2, 0])
    sz = 0.5 * (R[1, 0] - R[0, 1])
    sin_t = np.sqrt(sx * sx + sy * sy + sz * sz)
    return np.arctan2(sin_t, cos_t)


@jit
def so3_log(R):
    cos_t = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    s = np.empty(3)
    s[0] = 0.5 * (R[2, 1] - R[1, 2])
    s[1] = 0.5 * (R[0, 2] - R[2, 0])
    s[2] = 0.5 * (R[1, 0] - R[0, 1])
    sin_t = norm3(s)
    theta = np.arctan2(sin_t, cos_t)
    if theta < 1e-6:
        return (1.0 + theta * theta / 6.0) * s
    if theta < 3.0:
        return (theta / sin_t) * s
    # near pi: axis from the symmetric part, sign from the skew part
    B = 0.5 * (R + R.T)
    for i in range(3):
        B[i, i] -= cos_t
    i = 0
    if B[1, 1] > B[i, i]:
        i = 1
    if B[2, 2] > B[i, i]:
        i = 2
    n = B[:, i].copy()
    n = n / norm3(n)
    if n[0] * s[0] + n[1] * s[1] + n[2] * s[2] < 0.0:
        n = -n
    return theta * n


@jit
def polar_project(R):
    U, _, Vt = np.linalg.svd(R)
    Q = np.dot(U, Vt)
    if np.linalg.det(Q) < 0.0:
        U[:, 2] = -U[:, 2]
        Q = np.dot(U, Vt)
    return Q


# --------------------------------------------------------------------------
# SE2(3)
# --------------------------------------------------------------------------


@jit
def se23_exp(xi):
    phi = xi[0:3].copy()
    R = so3_exp(phi)
    J = so3_left_jacobian(phi)
    v = np.dot(J, xi[3:6].copy())
    p = np.dot(J, xi[6:9].copy())
    return R, v, p


@jit
def se23_log(R, v, p):
    phi = so3_log(R)
    Jinv = so3_left_jacobian_inv(phi)
    xi = np.empty(9)
    xi[0:3] = phi
    xi[3:6] = np.dot(Jinv, v)
    xi[6:9] = np.dot(Jinv, p)
    return xi


@jit
def se23_adjoint(R, v, p):
    Ad = np.zeros((9, 9))
    Ad[0:3, 0:3] = R
    Ad[3:6, 3:6] = R
    Ad[6:9, 6:9] = R
    Ad[3:6, 0:3] = np.dot(skew(v), R)
    Ad[6:9, 0:3] = np.dot(skew(p), R)
    return Ad


@jit
def se23_ad(xi):
    ad = np.zeros((9, 9))
    Sphi = skew(xi[0:3])
    ad[0:3, 0:3] = Sphi
    ad[3:6, 3:6] = Sphi
    ad[6:9, 6:9] = Sphi
    ad[3:6, 0:3] = skew(xi[3:6])
    ad[6:9, 0:3] = skew(xi[6:9])
    return ad


# --------------------------------------------------------------------------
# INS group SE2(3) x R3 x R3 on nav vectors
# --------------------------------------------------------------------------


@jit
def nav_rotation(x):
    return x[0:9].copy().reshape((3, 3))


@jit
def nav_adjoint(x):
    Ad = np.eye(DOF)
    Ad[0:9, 0:9] = se23_adjoint(nav_rotation(x), x[9:12].copy(), x[12:15].copy())
    return Ad


@jit
def nav_ad(xi):
    ad = np.zeros((DOF, DOF))
    ad[0:9, 0:9] = se23_ad(xi)
    return ad


@jit
def nav_adjoint_exp(xi):
    """Adjoint matrix of exp(xi) on the INS group."""
    Re, ve, pe = se23_exp(xi)
    Ad = np.eye(DOF)
    Ad[0:9, 0:9] = se23_adjoint(Re, ve, pe)
    return Ad


@jit
def nav_mul_exp(x, xi):
    """x * exp(xi)."""
    R = nav_rotation(x)
    Re, ve, pe = se23_exp(xi)
    out = np.empty(NAV_SIZE)
    out[0:9] = np.dot(R, Re).ravel()
    out[9:12] = np.dot(R, ve) + x[9:12]
    out[12:15] = np.dot(R, pe) + x[12:15]
    out[15:21] = x[15:21] + xi[9:15]
    return out


@jit
def exp_mul_nav(xi, x):
    """exp(xi) * x."""
    R = nav_rotation(x)
    Re, ve, pe = se23_exp(xi)
    out = np.empty(NAV_SIZE)
    out[0:9] = np.dot(Re, R).ravel()
    out[9:12] = np.dot(Re, x[9:12].copy()) + ve
    out[12:15] = np.dot(Re, x[12:15].copy()) + pe
    out[15:21] = x[15:21] + xi[9:15]
    return out


@jit
def body_drift(x, f, w, gamma, tau_f, tau_w):
    """Body velocity a(g, u) of the strapdown model."""
    R = nav_rotation(x)
    a = np.empty(DOF)
    a[0:3] = w - x[18:21]
    a[3:6] = f - x[15:18] + np.dot(R.T, gamma)
    a[6:9] = np.dot(R.T, x[9:12].copy())
    a[9:12] = -x[15:18] / tau_f
    a[12:15] = -x[18:21] / tau_w
    return a


@jit
def body_drift_jacobian(x, f, w, gamma, tau_f, tau_w):
    """Right derivative of the body drift with respect to the state."""
    R = nav_rotation(x)
    D = np.zeros((DOF, DOF))
    eye = np.eye(3)
    D[0:3, 12:15] = -eye
    D[3:6, 0:3] = skew(np.dot(R.T, gamma))
    D[3:6, 9:12] = -eye
    D[6:9, 0:3] = skew(np.dot(R.T, x[9:12].copy()))
    D[6:9, 3:6] = eye
    D[9:12, 9:12] = -eye / tau_f
    D[12:15, 12:15] = -eye / tau_w
    return D


@jit
def spatial_drift(x, f, w, gamma, tau_f, tau_w):
    """Spatial velocity Ad_g a(g, u)."""
    R = nav_rotation(x)
    v = x[9:12].copy()
    p = x[12:15].copy()
    Rw = np.dot(R, w - x[18:21])
    Rs = np.dot(R, f - x[15:18])
    a = np.empty(DOF)
    a[0:3] = Rw
    a[3:6] = np.dot(skew(v), Rw) + Rs + gamma
    a[6:9] = np.dot(skew(p), Rw) + v
    a[9:12] = -x[15:18] / tau_f
    a[12:15] = -x[18:21] / tau_w
    return a


@jit
def spatial_drift_jacobian(x, f, w, gamma, tau_f, tau_w):
    """Left derivative of the spatial drift with respect to the state."""
    R = nav_rotation(x)
    v = x[9:12].copy()
    p = x[12:15].copy()
    Rw = np.dot(R, w - x[18:21])
    Rs = np.dot(R, f - x[15:18])
    Sv = skew(v)
    Sp = skew(p)
    SRw = skew(Rw)
    eye = np.eye(3)
    D = np.zeros((DOF, DOF))
    D[0:3, 0:3] = -SRw
    D[0:3, 12:15] = -R
    D[3:6, 0:3] = -skew(np.dot(Sv, Rw)) - skew(Rs)
    D[3:6, 3:6] = -SRw
    D[3:6, 9:12] = -R
    D[3:6, 12:15] = -np.dot(Sv, R)
    D[6:9, 0:3] = -skew(np.dot(Sp, Rw)) - Sv
    D[6:9, 3:6] = eye
    D[6:9, 6:9] = -SRw
    D[6:9, 12:15] = -np.dot(Sp, R)
    D[9:12, 9:12] = -eye / tau_f
    D[12:15, 12:15] = -eye / tau_w
    return D


@jit
def noise_input():
    """Constant body-frame noise input matrix; noise order (w_f, w_w, w_bf, w_bw)."""
    B = np.zeros((DOF, 12))
    eye = np.eye(3)
    B[0:3, 3:6] = -eye
    B[3:6, 0:3] = -eye
    B[9:12, 6:9] = eye
    B[12:15, 9:12] = eye
    return B


@jit
def strapdown_step(R, v, p, f, w, dt, gamma):
    """Exact strapdown flow over ``dt`` for body rate ``w`` and specific
    force ``f`` held constant."""
    phi = w * dt
    Rn = np.dot(R, so3_exp(phi))
    vn = v + np.dot(R, np.dot(so3_left_jacobian(phi), f)) * dt + gamma * dt
    pn = p + v * dt + np.dot(R, np.dot(so3_gamma2(phi), f)) * (dt * dt) + 0.5 * gamma * (dt * dt)
    return Rn, vn, pn


@jit
def nav_flow(x, f, w, dt, gamma, tau_f, tau_w):
    """Filter mean step: exact strapdown flow under the bias-corrected IMU
    sample and an Euler step of the bias decay."""
    bf = x[15:18].copy()
    bw = x[18:21].copy()
    Rn, vn, pn = strapdown_step(nav_rotation(x), x[9:12].copy(), x[12:15].copy(), f - bf, w - bw, dt, gamma)
    out = np.empty(NAV_SIZE)
    out[0:9] = Rn.ravel()
    out[9:12] = vn
    out[12:15] = pn
    out[15:18] = bf - bf / tau_f * dt
    out[18:21] = bw - bw / tau_w * dt
    return out


@jit
def nav_increment(x, xn):
    """Body-frame displacement ``log(g^-1 g')`` between two nav vectors."""
    R = nav_rotation(x)
    Rt = R.T.copy()
    xi = np.empty(DOF)
    xi[0:9] = se23_log(np.dot(Rt, nav_rotation(xn)), np.dot(Rt, xn[9:12] - x[9:12]), np.dot(Rt, xn[12:15] - x[12:15]))
    xi[9:15] = xn[15:21] - x[15:21]
    return xi


# --------------------------------------------------------------------------
# Propagation loops
# --------------------------------------------------------------------------


@jit
def propagate_left(x0, P0, f, w, dt, gamma, tau_f, tau_w, BQBt, integrator,
                   xs_out, covs_out, record_cov):
    """Left-invariant filter propagation over len(f) IMU samples.

    ``xs_out`` receives N + 1 nav vectors (the first is ``x0``); when
    ``record_cov`` is set ``covs_out`` receives N + 1 covariances.
    """
    n = f.shape[0]
    x = x0.copy()
    P = P0.copy()
    xs_out[0] = x
    if record_cov:
        covs_out[0] = P
    for k in range(n):
        fk = f[k].copy()
        wk = w[k].copy()
        xn = nav_flow(x, fk, wk, dt, gamma, tau_f, tau_w)
        D = body_drift_jacobian(x, fk, wk, gamma, tau_f, tau_w)
        if integrator == INTEGRATOR_TRANSPORT:
            xi = nav_increment(x, xn) / dt
            Phi = np.eye(DOF) + (D - 0.5 * nav_ad(xi)) * dt
            P = np.dot(np.dot(Phi, P), Phi.T) + BQBt * dt
            T = nav_adjoint_exp(-0.5 * dt * xi)
            P = np.dot(np.dot(T, P), T.T)
        else:
            a = body_drift(x, fk, wk, gamma, tau_f, tau_w)
            MP = np.dot(D - nav_ad(a), P)
            P = P + (MP + MP.T + BQBt) * dt
        P = 0.5 * (P + P.T)
        x = xn
        xs_out[k + 1] = x
        if record_cov:
            covs_out[k + 1] = P
    return P


@jit
def propagate_right(x0, P0, f, w, dt, gamma, tau_f, tau_w, BQBt, integrator,
                    xs_out, covs_out, record_cov):
    """Right-invariant filter propagation; see ``propagate_left``."""
    n = f.shape[0]
    x = x0.copy()
    P = P0.copy()
    xs_out[0] = x
    if record_cov:
        covs_out[0] = P
    for k in range(n):
        fk = f[k].copy()
        wk = w[k].copy()
        xn = nav_flow(x, fk, wk, dt, gamma, tau_f, tau_w)
        a = spatial_drift(x, fk, wk, gamma, tau_f, tau_w)
        D = spatial_drift_jacobian(x, fk, wk, gamma, tau_f, tau_w)
        Adx = nav_adjoint(x)
        Qbar = np.dot(np.dot(Adx, BQBt), Adx.T)
        if integrator == INTEGRATOR_TRANSPORT:
            xi = np.dot(Adx, nav_increment(x, xn)) / dt
            Phi = np.eye(DOF) + (D + nav_ad(a) - 0.5 * nav_ad(xi)) * dt
            P = np.dot(np.dot(Phi, P), Phi.T) + Qbar * dt
            T = nav_adjoint_exp(0.5 * dt * xi)
            P = np.dot(np.dot(T, P), T.T)
        else:
            MP = np.dot(D + nav_ad(a), P)
            P = P + (MP + MP.T + Qbar) * dt
        P = 0.5 * (P + P.T)
        x = xn
        xs_out[k + 1] = x
        if record_cov:
            covs_out[k + 1] = P
    return P


@jit
def simulate_truth(x0, f, w, bias_noise, dt, gamma, tau_f, tau_w, reorth_every, xs_out):
    """Integrate the true strapdown kinematics under zero-order-hold inputs.

    Rotation, velocity and position use the exact flow for constant body
    rate and specific force over each step. The Gauss-Markov biases use an
    Euler-Maruyama step driven by ``bias_noise`` (N x 6, already scaled as
    white-noise samples of variance sigma^2/dt).
    """
    n = f.shape[0]
    x = x0.copy()
    xs_out[0] = x
    for k in range(n):
        Rn, vn, pn = strapdown_step(nav_rotation(x), x[9:12].copy(), x[12:15].copy(), f[k].copy(), w[k].copy(), dt, gamma)
        if reorth_every > 0 and (k + 1) % reorth_every == 0:
            Rn = polar_project(Rn)
        x[0:9] = Rn.ravel()
        x[9:12] = vn
        x[12:15] = pn
        bf = x[15:18].copy()
        bw = x[18:21].copy()
        x[15:18] = bf + (-bf / tau_f + bias_noise[k, 0:3]) * dt
        x[18:21] = bw + (-bw / tau_w + bias_noise[k, 3:6]) * dt
        xs_out[k + 1] = x
    return x
