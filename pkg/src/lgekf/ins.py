"""Strapdown INS with GNSS position fixes on SE2(3) x R3 x R3.

The state is ``(R, v, p, b_f, b_w)``: attitude, velocity and position in
the navigation frame plus first-order Gauss-Markov accelerometer and gyro
biases. IMU specific force ``f`` and rate ``w`` are the inputs; GNSS gives
position.

Internally the compiled kernels work on a flat 21-vector (rotation row-major,
velocity, position, accelerometer bias, gyro bias); :func:`nav_to_matrix`
and :func:`matrix_to_nav` convert to and from the 13x13 group element.
Algebra vectors are ordered (rotation, velocity, position, b_f, b_w), and
the process noise is ordered (w_f, w_w, w_bf, w_bw).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .ekf import (
    LEFT,
    FilterConfig,
    FilterState,
    LieEKF,
    NumericalFailure,
    SystemModel,
    check_positive_definite,
)
from .groups import ins_group

GRAVITY = (0.0, 0.0, -9.81)


@dataclass(frozen=True)
class InsNoiseParams:
    """Sensor and bias noise densities; defaults describe a tactical IMU."""

    sigma_f: float = 6.9343e-4
    sigma_omega: float = 3.0853e-5
    sigma_bf: float = 4.1881e-5
    sigma_bomega: float = 3.9284e-6
    tau_bf: float = 600.0
    tau_bomega: float = 600.0
    sigma_y: float = 0.07
    gnss_inflation: float = 3.0
    gravity: tuple = GRAVITY

    def __post_init__(self):
        for name in ("sigma_f", "sigma_omega", "sigma_bf", "sigma_bomega", "sigma_y"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("tau_bf", "tau_bomega", "gnss_inflation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if len(self.gravity) != 3:
            raise ValueError("gravity must have three components")

    @property
    def Q(self):
        var = np.repeat(
            [self.sigma_f**2, self.sigma_omega**2, self.sigma_bf**2, self.sigma_bomega**2], 3
        )
        return np.diag(var)

    @property
    def N(self):
        """Measurement covariance used by the filters (inflated GNSS noise)."""
        return self.gnss_inflation * self.sigma_y**2 * np.eye(3)


@dataclass(frozen=True)
class InitialCovariance:
    """Standard deviations of the body-frame initial error."""

    std_rotation: float = float(np.deg2rad(20.0))
    std_velocity: float = 10.0
    std_position: float = 10.0
    std_bias_f: float = 0.0073
    std_bias_omega: float = 0.0012

    def stds(self):
        return np.repeat(
            [self.std_rotation, self.std_velocity, self.std_position, self.std_bias_f, self.std_bias_omega],
            3,
        )

    def matrix(self):
        return np.diag(self.stds() ** 2)


# --------------------------------------------------------------------------
# nav vector <-> group element
# --------------------------------------------------------------------------


def nav_from_parts(R=None, v=None, p=None, b_f=None, b_w=None):
    x = np.zeros(K.NAV_SIZE)
    x[0:9] = (np.eye(3) if R is None else np.asarray(R, dtype=float)).ravel()
    for sl, val in ((slice(9, 12), v), (slice(12, 15), p), (slice(15, 18), b_f), (slice(18, 21), b_w)):
        if val is not None:
            x[sl] = val
    return x


def nav_parts(x):
    x = np.asarray(x, dtype=float)
    return x[0:9].reshape(3, 3), x[9:12], x[12:15], x[15:18], x[18:21]


def nav_to_matrix(x):
    R, v, p, b_f, b_w = nav_parts(x)
    g = np.eye(13)
    g[0:3, 0:3] = R
    g[0:3, 3] = v
    g[0:3, 4] = p
    g[5:8, 8] = b_f
    g[9:12, 12] = b_w
    return g


def matrix_to_nav(g):
    g = np.asarray(g, dtype=float)
    return nav_from_parts(g[0:3, 0:3], g[0:3, 3], g[0:3, 4], g[5:8, 8], g[9:12, 12])


def _split_input(u):
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != (6,):
        raise ValueError("INS input must be the 6-vector (f, w)")
    return u[0:3].copy(), u[3:6].copy()


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------


class InsModel:
    """Drift, noise and GNSS measurement functions for the INS state.

    Inputs ``u`` are 6-vectors ``(f, w)`` of IMU specific force and body
    rate. All functions accept 13x13 group elements.
    """

    def __init__(self, params: InsNoiseParams = InsNoiseParams()):
        self.params = params
        self.group = ins_group()
        self.gravity = np.asarray(params.gravity, dtype=float)
        self.Q = params.Q
        self.N = params.N
        self._B = K.noise_input()

    def _args(self, g, u):
        f, w = _split_input(u)
        return matrix_to_nav(g), f, w, self.gravity, self.params.tau_bf, self.params.tau_bomega

    def drift(self, g, u):
        return K.body_drift(*self._args(g, u))

    def flow(self, g, u, dt):
        """Exact strapdown step for the bias-corrected input held over ``dt``."""
        return nav_to_matrix(K.nav_flow(*self._args(g, u)[:3], dt, *self._args(g, u)[3:]))

    def drift_jacobian(self, g, u):
        return K.body_drift_jacobian(*self._args(g, u))

    def spatial_drift(self, g, u):
        return K.spatial_drift(*self._args(g, u))

    def spatial_drift_jacobian(self, g, u):
        return K.spatial_drift_jacobian(*self._args(g, u))

    def noise_input(self, g=None, u=None):
        return self._B.copy()

    def body_noise_cov(self):
        return self._B @ self.Q @ self._B.T

    @staticmethod
    def measurement(g, u=None):
        return np.asarray(g, dtype=float)[0:3, 4].copy()

    @staticmethod
    def measurement_jacobian(g, u=None):
        C = np.zeros((3, 15))
        C[:, 6:9] = np.asarray(g, dtype=float)[0:3, 0:3]
        return C

    @staticmethod
    def measurement_jacobian_left(g, u=None):
        C = np.zeros((3, 15))
        C[:, 0:3] = -K.skew(np.ascontiguousarray(np.asarray(g, dtype=float)[0:3, 4]))
        C[:, 6:9] = np.eye(3)
        return C

    @staticmethod
    def measurement_noise_input(g=None, u=None):
        return np.eye(3)

    def system_model(self):
        return SystemModel(
            group=self.group,
            drift=self.drift,
            noise_input=self.noise_input,
            measurement=self.measurement,
            measurement_noise_input=self.measurement_noise_input,
            Q=self.Q,
            N=self.N,
            drift_jacobian=self.drift_jacobian,
            spatial_drift=self.spatial_drift,
            spatial_drift_jacobian=self.spatial_drift_jacobian,
            measurement_jacobian=self.measurement_jacobian,
            measurement_jacobian_left=self.measurement_jacobian_left,
            flow=self.flow,
        )


_KERNEL_INTEGRATORS = {"transport": K.INTEGRATOR_TRANSPORT, "euler": K.INTEGRATOR_EULER}


@dataclass
class PropagationRecord:
    """Estimates (as nav vectors) and optionally covariances along a block."""

    states: np.ndarray
    covs: np.ndarray | None = field(default=None, repr=False)


class InsFilter(LieEKF):
    """:class:`LieEKF` on the INS model with a compiled IMU propagation loop.

    The generic ``propagate``/``update`` methods still work; the
    ``propagate_imu`` fast path integrates a whole block of IMU samples in
    one kernel call using the analytic system matrices.
    """

    def __init__(self, model: InsModel | None = None, config: FilterConfig = FilterConfig()):
        model = InsModel() if model is None else model
        super().__init__(model.system_model(), config)
        self.ins = model
        if config.integrator not in _KERNEL_INTEGRATORS:
            self._kernel_integrator = None
        else:
            self._kernel_integrator = _KERNEL_INTEGRATORS[config.integrator]
        B = model.noise_input()
        self._BQBt = np.ascontiguousarray(B @ model.Q @ B.T)

    def propagate_imu(self, state, f, w, record_cov=False):
        """Propagate through IMU samples ``f``, ``w`` of shape ``(N, 3)``.

        Sample ``k`` is held over ``[t + k dt, t + (k+1) dt)``. Returns the
        final state and a :class:`PropagationRecord` with ``N + 1`` rows.
        """
        f = np.ascontiguousarray(f, dtype=float)
        w = np.ascontiguousarray(w, dtype=float)
        if f.ndim != 2 or f.shape[1] != 3 or w.shape != f.shape:
            raise ValueError("f and w must both have shape (N, 3)")
        n = f.shape[0]
        dt = self.config.dt
        if self._kernel_integrator is None:
            return self._propagate_generic(state, f, w, record_cov)
        x0 = matrix_to_nav(state.estimate)
        xs = np.empty((n + 1, K.NAV_SIZE))
        covs = np.empty((n + 1, K.DOF, K.DOF) if record_cov else (1, K.DOF, K.DOF))
        p = self.ins.params
        kernel = K.propagate_left if self.side == LEFT else K.propagate_right
        P = kernel(
            x0, np.ascontiguousarray(state.cov, dtype=float), f, w, dt, self.ins.gravity,
            p.tau_bf, p.tau_bomega, self._BQBt, self._kernel_integrator, xs, covs, record_cov,
        )
        t = state.time + n * dt
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(xs[-1]))):
            raise NumericalFailure(f"non-finite filter state at t={t}")
        check_positive_definite(P, t)
        final = FilterState(nav_to_matrix(xs[-1]), P, t)
        return final, PropagationRecord(xs, covs if record_cov else None)

    def _propagate_generic(self, state, f, w, record_cov):
        xs = [matrix_to_nav(state.estimate)]
        covs = [state.cov]
        for fk, wk in zip(f, w):
            state = self.step(state, np.concatenate([fk, wk]), self.config.dt)
            xs.append(matrix_to_nav(state.estimate))
            if record_cov:
                covs.append(state.cov)
        return state, PropagationRecord(np.array(xs), np.array(covs) if record_cov else None)

    def update_gnss(self, state, y):
        return self.update(state, y)


__all__ = [
    "GRAVITY",
    "InsNoiseParams",
    "InitialCovariance",
    "InsModel",
    "InsFilter",
    "PropagationRecord",
    "nav_from_parts",
    "nav_parts",
    "nav_to_matrix",
    "matrix_to_nav",
]
