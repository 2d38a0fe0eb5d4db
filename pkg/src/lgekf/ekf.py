"""Continuous-discrete extended Kalman filters on matrix Lie groups.

The left filter linearizes the left-invariant error ``g_n^-1 g`` and keeps
its covariance in the body frame; the right filter uses ``g g_n^-1`` and a
spatial-frame covariance. Both propagate the estimate with a Lie-Euler step
``g exp(a dt)`` unless the model supplies its exact flow for a held input,
and, after every measurement, reset the covariance with the group Jacobian
of the correction (full order), its two-term truncation (first order) or
not at all (zero order).

Covariance integrators
----------------------
``transport`` (default)
    Let ``xi`` be the constant algebra rate that carries the estimate
    across the step (``g+ = g exp(xi dt)`` on the left, ``exp(xibar dt) g``
    on the right; ``xi = a`` for the Lie-Euler step). Half of the frame
    transport is integrated exactly with that exponential and the rest with
    a first-order congruence step::

        left:  P+ = T (F P F^T + B Q B^T dt) T^T,
               F = I + M dt, M = A + ad_a - ad_xi / 2, T = Ad(exp(-xi dt / 2))
        right: P+ = T (F P F^T + Bb Q Bb^T dt) T^T,
               F = I + M dt, M = Abar - ad_xibar / 2,  T = Ad(exp(xibar dt / 2))

    with ``xibar = Ad_g xi``. The two updates are exact conjugates under
    ``Pbar = Ad_g P Ad_g^T``, so the left/right equivalence of the
    continuous filters survives discretization to round-off. Every factor is
    a congruence, so the covariance stays positive definite however badly
    it is conditioned. Accuracy is first order, like Euler.
``euler``
    Explicit Euler on the Riccati equation. It drops the ``M P M^T dt^2``
    term of the congruence form and can turn an ill-conditioned covariance
    (for example right after a precise position fix) indefinite.
``rk2``
    Midpoint rule with the system matrices re-evaluated at the half step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .gaussian import CovarianceError, congruence, symmetrize
from .lie import MatrixLieGroup

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)

ZERO = "zero"
FIRST = "first"
FULL = "full"
RESET_ORDERS = (ZERO, FIRST, FULL)

INTEGRATORS = ("transport", "euler", "rk2")

_ORDER_TAGS = {FULL: "FO", FIRST: "1O", ZERO: "0O"}
VARIANTS = ("L-FO", "R-FO", "L-1O", "R-1O", "L-0O", "R-0O")


class NumericalFailure(ArithmeticError):
    """Filter arithmetic broke down (indefinite covariance, singular innovation)."""


@dataclass(frozen=True)
class SystemModel:
    """``dg = g (a(g,u) + B(g,u) w)^``, ``y = c(g,u) + D(g,u) eta``.

    ``Q`` and ``N`` are the covariances of ``w`` and ``eta``. Optional
    analytic derivatives: ``drift_jacobian`` (right derivative of ``a``),
    ``spatial_drift`` (``Ad_g a``), ``spatial_drift_jacobian`` (left
    derivative of ``Ad_g a``), ``measurement_jacobian`` (right derivative of
    ``c``) and ``measurement_jacobian_left``. ``flow(g, u, dt)`` replaces
    the default mean step ``g exp(a dt)`` when the model knows its exact
    flow for a held input.
    """

    group: MatrixLieGroup
    drift: Callable
    noise_input: Callable
    measurement: Callable
    measurement_noise_input: Callable
    Q: np.ndarray
    N: np.ndarray
    drift_jacobian: Optional[Callable] = None
    spatial_drift: Optional[Callable] = None
    spatial_drift_jacobian: Optional[Callable] = None
    measurement_jacobian: Optional[Callable] = None
    measurement_jacobian_left: Optional[Callable] = None
    flow: Optional[Callable] = None

    def spatial_drift_at(self, g, u):
        if self.spatial_drift is not None:
            return self.spatial_drift(g, u)
        return self.group.Ad(g) @ self.drift(g, u)

    def spatial_noise_input(self, g, u):
        return self.group.Ad(g) @ self.noise_input(g, u)


@dataclass(frozen=True)
class FilterConfig:
    side: str = LEFT
    reset_order: str = FULL
    dt: float = 1e-3
    derivative_mode: str = "analytic"
    fd_step: float = 1e-6
    integrator: str = "transport"

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        if self.reset_order not in RESET_ORDERS:
            raise ValueError(f"reset_order must be one of {RESET_ORDERS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.derivative_mode not in ("analytic", "fd"):
            raise ValueError("derivative_mode must be 'analytic' or 'fd'")
        if not 1e-8 <= self.fd_step <= 1e-4:
            raise ValueError("fd_step must lie in [1e-8, 1e-4]")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")

    @property
    def label(self):
        return f"{self.side[0].upper()}-{_ORDER_TAGS[self.reset_order]}"

    @classmethod
    def from_label(cls, label, **kwargs):
        """Build a config from a variant name such as ``"R-1O"``."""
        try:
            side_tag, order_tag = label.upper().split("-")
            side = {"L": LEFT, "R": RIGHT}[side_tag]
            order = {v: k for k, v in _ORDER_TAGS.items()}[order_tag]
        except (ValueError, KeyError):
            raise ValueError(f"unknown filter variant {label!r}; expected one of {VARIANTS}") from None
        return cls(side=side, reset_order=order, **kwargs)


@dataclass(frozen=True)
class FilterState:
    estimate: np.ndarray
    cov: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class UpdateResult:
    state: FilterState
    gain: np.ndarray
    correction: np.ndarray
    innovation: np.ndarray = field(repr=False)
    measurement_matrix: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# derivatives and system matrices
# --------------------------------------------------------------------------


def right_derivative(f, g, group, h=1e-6):
    """Central difference of ``xi -> f(g exp(xi))`` at zero."""
    cols = []
    for e in np.eye(group.k) * h:
        fp = np.asarray(f(g @ group.exp(e)), dtype=float)
        fm = np.asarray(f(g @ group.exp(-e)), dtype=float)
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def left_derivative(f, g, group, h=1e-6):
    """Central difference of ``xi -> f(exp(xi) g)`` at zero."""
    cols = []
    for e in np.eye(group.k) * h:
        fp = np.asarray(f(group.exp(e) @ g), dtype=float)
        fm = np.asarray(f(group.exp(-e) @ g), dtype=float)
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def _use_analytic(fn, mode):
    return fn is not None and mode == "analytic"


def drift_derivative(model, g, u, mode="analytic", h=1e-6):
    if _use_analytic(model.drift_jacobian, mode):
        return model.drift_jacobian(g, u)
    return right_derivative(lambda x: model.drift(x, u), g, model.group, h)


def spatial_drift_derivative(model, g, u, mode="analytic", h=1e-6):
    if _use_analytic(model.spatial_drift_jacobian, mode):
        return model.spatial_drift_jacobian(g, u)
    return left_derivative(lambda x: model.spatial_drift_at(x, u), g, model.group, h)


def system_matrix_left(model, g, u, mode="analytic", h=1e-6):
    """A = (right derivative of a) - ad_a."""
    return drift_derivative(model, g, u, mode, h) - model.group.ad(model.drift(g, u))


def system_matrix_right(model, g, u, mode="analytic", h=1e-6):
    """Abar = (left derivative of abar) + ad_abar."""
    return spatial_drift_derivative(model, g, u, mode, h) + model.group.ad(model.spatial_drift_at(g, u))


def measurement_matrix_left(model, g, u, mode="analytic", h=1e-6):
    if _use_analytic(model.measurement_jacobian, mode):
        return model.measurement_jacobian(g, u)
    return right_derivative(lambda x: model.measurement(x, u), g, model.group, h)


def measurement_matrix_right(model, g, u, mode="analytic", h=1e-6):
    if _use_analytic(model.measurement_jacobian_left, mode):
        return model.measurement_jacobian_left(g, u)
    return left_derivative(lambda x: model.measurement(x, u), g, model.group, h)


def reset_matrix(group, zeta, order, side):
    """Covariance reset applied after an update with correction ``zeta``."""
    if order == ZERO:
        return np.eye(group.k)
    if order == FIRST:
        sign = -0.5 if side == LEFT else 0.5
        return np.eye(group.k) + sign * group.ad(zeta)
    if order == FULL:
        return group.jac_right(zeta) if side == LEFT else group.jac_left(zeta)
    raise ValueError(f"unknown reset order {order!r}")


def check_positive_definite(P, time=None):
    """Raise :class:`NumericalFailure` if ``P`` is indefinite or not finite.

    Exactly singular but positive semi-definite covariances (for example a
    perfectly known initial state) are accepted.
    """
    try:
        np.linalg.cholesky(P)
        return
    except np.linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(P)):
        raise NumericalFailure(f"covariance became non-finite at t={time}")
    eig = np.linalg.eigvalsh(symmetrize(P))
    if eig[0] < -1e-12 * max(abs(eig[-1]), np.finfo(float).tiny):
        raise NumericalFailure(f"covariance lost positive definiteness at t={time}: min eigenvalue {eig[0]:.3e}")


# --------------------------------------------------------------------------
# the filter
# --------------------------------------------------------------------------


class LieEKF:
    """Left- or right-invariant continuous-discrete EKF on ``model.group``."""

    def __init__(self, model: SystemModel, config: FilterConfig = FilterConfig()):
        self.model = model
        self.config = config
        self.group = model.group

    @property
    def side(self):
        return self.config.side

    def system_matrix(self, g, u):
        cfg = self.config
        if cfg.side == LEFT:
            return system_matrix_left(self.model, g, u, cfg.derivative_mode, cfg.fd_step)
        return system_matrix_right(self.model, g, u, cfg.derivative_mode, cfg.fd_step)

    def measurement_matrix(self, g, u):
        cfg = self.config
        if cfg.side == LEFT:
            return measurement_matrix_left(self.model, g, u, cfg.derivative_mode, cfg.fd_step)
        return measurement_matrix_right(self.model, g, u, cfg.derivative_mode, cfg.fd_step)

    # --- propagation ---------------------------------------------------

    def _velocity(self, g, u):
        if self.side == LEFT:
            return self.model.drift(g, u)
        return self.model.spatial_drift_at(g, u)

    def _advance(self, g, xi):
        G = self.group
        return g @ G.exp(xi) if self.side == LEFT else G.exp(xi) @ g

    def _mean_step(self, g, u, vel, dt):
        if self.model.flow is not None:
            return self.model.flow(g, u, dt)
        return self._advance(g, dt * vel)

    def _step_rate(self, g, g_new, vel, dt):
        """Constant algebra rate that carries ``g`` to ``g_new`` in ``dt``,
        on the filter's side. Equals ``vel`` for the default mean step."""
        if self.model.flow is None:
            return vel
        G = self.group
        if self.side == LEFT:
            return G.log(G.inverse(g) @ g_new) / dt
        return G.log(g_new @ G.inverse(g)) / dt

    def _noise_cov(self, g, u):
        B = self.model.noise_input(g, u) if self.side == LEFT else self.model.spatial_noise_input(g, u)
        return B @ self.model.Q @ B.T

    def _riccati_rate(self, A, P, W):
        AP = A @ P
        return AP + AP.T + W

    def step(self, state, u, dt):
        """One propagation sub-step of length ``dt`` with input held constant."""
        G = self.group
        g, P = state.estimate, state.cov
        vel = self._velocity(g, u)
        A = self.system_matrix(g, u)
        W = self._noise_cov(g, u)
        method = self.config.integrator
        g_new = self._mean_step(g, u, vel, dt)
        if method == "transport":
            xi = self._step_rate(g, g_new, vel, dt)
            if self.side == LEFT:
                M = A + G.ad(vel) - 0.5 * G.ad(xi)
                T = G.Ad(G.exp(-0.5 * dt * xi))
            else:
                M = A - 0.5 * G.ad(xi)
                T = G.Ad(G.exp(0.5 * dt * xi))
            Phi = np.eye(G.k) + M * dt
            P_new = congruence(T, Phi @ P @ Phi.T + W * dt)
        elif method == "euler":
            P_new = symmetrize(P + self._riccati_rate(A, P, W) * dt)
        else:
            k1 = self._riccati_rate(A, P, W)
            g_mid = self._mean_step(g, u, vel, 0.5 * dt)
            P_mid = P + 0.5 * dt * k1
            k2 = self._riccati_rate(self.system_matrix(g_mid, u), P_mid, self._noise_cov(g_mid, u))
            P_new = symmetrize(P + dt * k2)
        t = state.time + dt
        check_positive_definite(P_new, t)
        return FilterState(g_new, P_new, t)

    def propagate(self, state, u, duration):
        """Integrate over ``duration`` (a whole multiple of ``config.dt``)."""
        dt = self.config.dt
        steps = int(round(duration / dt))
        if steps < 0 or abs(steps * dt - duration) > 1e-9 * max(1.0, abs(duration)):
            raise ValueError(f"duration {duration} is not a whole multiple of dt={dt}")
        for _ in range(steps):
            state = self.step(state, u, dt)
        return state

    # --- measurement update --------------------------------------------

    def update_details(self, state, y, u=None):
        G = self.group
        g, P = state.estimate, state.cov
        y = np.asarray(y, dtype=float)
        C = self.measurement_matrix(g, u)
        if not np.all(np.isfinite(y)):
            k = G.k
            return UpdateResult(state, np.zeros((k, y.size)), np.zeros(k), np.full(y.size, np.nan), C)
        D = self.model.measurement_noise_input(g, u)
        S = C @ P @ C.T + D @ self.model.N @ D.T
        try:
            factor = scipy.linalg.cho_factor(symmetrize(S))
        except np.linalg.LinAlgError:
            raise NumericalFailure(f"innovation covariance is singular at t={state.time}") from None
        K = scipy.linalg.cho_solve(factor, C @ P).T
        innovation = y - self.model.measurement(g, u)
        zeta = K @ innovation
        J = reset_matrix(G, zeta, self.config.reset_order, self.side)
        P_new = congruence(J, (np.eye(G.k) - K @ C) @ P)
        check_positive_definite(P_new, state.time)
        new_state = FilterState(self._advance(g, zeta), P_new, state.time)
        return UpdateResult(new_state, K, zeta, innovation, C)

    def update(self, state, y, u=None):
        return self.update_details(state, y, u).state


def initial_state_pair(group, estimate, cov_left, time=0.0):
    """Matched left/right initial states: the right covariance is Ad P Ad^T."""
    Ad = group.Ad(estimate)
    left = FilterState(np.array(estimate, dtype=float), symmetrize(np.asarray(cov_left, dtype=float)), time)
    right = replace(left, estimate=left.estimate.copy(), cov=congruence(Ad, left.cov))
    return left, right


__all__ = [
    "LEFT",
    "RIGHT",
    "ZERO",
    "FIRST",
    "FULL",
    "VARIANTS",
    "CovarianceError",
    "NumericalFailure",
    "SystemModel",
    "FilterConfig",
    "FilterState",
    "UpdateResult",
    "LieEKF",
    "right_derivative",
    "left_derivative",
    "system_matrix_left",
    "system_matrix_right",
    "measurement_matrix_left",
    "measurement_matrix_right",
    "reset_matrix",
    "initial_state_pair",
]
