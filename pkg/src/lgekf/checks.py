"""Self-checks behind ``lgekf verify``.

Each check returns a :class:`CheckResult`; the CLI exits nonzero when any
fails. The checks cover the group identities, the relation between the left
and right system matrices on the INS model, and the left/right equivalence
of the full-order filters on a simulated trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._kernels import so3_exp
from .ekf import left_derivative, right_derivative, system_matrix_left, system_matrix_right
from .groups import SE23, SO3, VectorGroup, ins_group
from .harness import ExperimentConfig, run_filter, total_error
from .ins import InsFilter, InsModel, nav_from_parts, nav_to_matrix
from .sim import simulate_trial


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tolerance:.0e})"


def _result(name, value, tol):
    return CheckResult(name, bool(np.isfinite(value) and value <= tol), float(value), tol)


def _groups():
    return {"SO3": SO3(), "SE23": SE23(), "R3": VectorGroup(3), "INS": ins_group()}


def group_identity_errors(group, rng, cases):
    """Worst errors over ``cases`` random draws for each identity."""
    worst = dict.fromkeys(
        ["exp_log", "log_exp", "ad_homomorphism", "jacobian_swap", "jacobian_adjoint", "jacobian_inverse"], 0.0
    )
    I = np.eye(group.k)
    for _ in range(cases):
        # scale 0.5 keeps rotation angles well inside the log domain
        zeta = 0.5 * rng.standard_normal(group.k)
        eta = 0.5 * rng.standard_normal(group.k)
        g = group.exp(zeta)
        h = group.exp(eta)
        worst["log_exp"] = max(worst["log_exp"], np.max(np.abs(group.log(g) - zeta)))
        worst["exp_log"] = max(worst["exp_log"], np.max(np.abs(group.exp(group.log(g)) - g)))
        worst["ad_homomorphism"] = max(
            worst["ad_homomorphism"], np.max(np.abs(group.Ad(g @ h) - group.Ad(g) @ group.Ad(h)))
        )
        Jr = group.jac_right(zeta)
        worst["jacobian_swap"] = max(
            worst["jacobian_swap"], np.max(np.abs(group.Ad(g) @ Jr - group.jac_right(-zeta)))
        )
        worst["jacobian_adjoint"] = max(
            worst["jacobian_adjoint"],
            np.max(np.abs(group.Ad(h) @ Jr - group.jac_right(group.Ad(h) @ zeta) @ group.Ad(h))),
        )
        worst["jacobian_inverse"] = max(
            worst["jacobian_inverse"], np.max(np.abs(group.jac_right_inv(zeta) @ Jr - I))
        )
    return worst


def check_group_identities(cases=200, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for name, group in _groups().items():
        for ident, err in group_identity_errors(group, rng, cases).items():
            out.append(_result(f"{name} {ident.replace('_', ' ')}", err, 1e-9))
    return out


def random_ins_element(rng, position_scale=10.0):
    return nav_to_matrix(
        nav_from_parts(
            so3_exp(rng.standard_normal(3)), 5 * rng.standard_normal(3), position_scale * rng.standard_normal(3),
            0.01 * rng.standard_normal(3), 0.001 * rng.standard_normal(3),
        )
    )


MEASUREMENT_FD_STEP = 1e-5


def check_system_matrix_relations(states=100, seed=1):
    """Abar = Ad (A + ad_a) Ad^-1 and Cbar = C Ad^-1, with FD derivatives.

    Round-off in the FD measurement matrices grows like eps |p| / h and is
    then multiplied by entries of Ad^-1 of size |p|, so the measurement
    relation uses a larger step and positions of a few tens of meters.
    """
    rng = np.random.default_rng(seed)
    model = InsModel()
    sm = model.system_model()
    G = model.group
    worst_a = worst_c = 0.0
    for _ in range(states):
        g = random_ins_element(rng)
        u = np.concatenate([3 * rng.standard_normal(3), 0.3 * rng.standard_normal(3)])
        Ad = G.Ad(g)
        Ad_inv = np.linalg.inv(Ad)
        A = system_matrix_left(sm, g, u, mode="fd")
        Abar = system_matrix_right(sm, g, u, mode="fd")
        pred = Ad @ (A + G.ad(model.drift(g, u))) @ Ad_inv
        worst_a = max(worst_a, np.max(np.abs(Abar - pred)))
        C = right_derivative(model.measurement, g, G, MEASUREMENT_FD_STEP)
        Cbar = left_derivative(model.measurement, g, G, MEASUREMENT_FD_STEP)
        worst_c = max(worst_c, np.max(np.abs(Cbar - C @ Ad_inv)))
    return [
        _result("INS right system matrix from left", worst_a, 1e-5),
        _result("INS right measurement matrix from left", worst_c, 1e-8),
    ]


def check_filter_equivalence(seed=7, trial_index=0, duration=10.0):
    """Full-order left and right filters on one simulated trajectory."""
    cfg = ExperimentConfig(trials=1, master_seed=seed)
    if duration != cfg.trajectory.duration:
        cfg = replace(cfg, trajectory=replace(cfg.trajectory, duration=duration))
    model = InsModel(cfg.noise)
    trial = simulate_trial(cfg.trajectory, cfg.noise, cfg.initial_covariance, seed, trial_index, model)
    left = run_filter(InsFilter(model, cfg.filter_config("L-FO")), trial, record_cov=True)
    right = run_filter(InsFilter(model, cfg.filter_config("R-FO")), trial, record_cov=True)
    if left.failure or right.failure:
        return [CheckResult("L-FO/R-FO run", False, float("nan"), 0.0)]
    est = float(np.max(total_error(left.states, right.states)))
    G = model.group
    rel = 0.0
    for x, P, Pbar in zip(left.states, left.covs, right.covs):
        Ad = G.Ad(nav_to_matrix(x))
        rel = max(rel, np.linalg.norm(Pbar - Ad @ P @ Ad.T) / np.linalg.norm(Pbar))
    return [
        _result("L-FO/R-FO estimate gap", est, 1e-6),
        _result("L-FO/R-FO covariance gap (relative)", rel, 1e-6),
    ]


def run_all(cases=200):
    return check_group_identities(cases) + check_system_matrix_relations() + check_filter_equivalence()


__all__ = [
    "CheckResult",
    "check_group_identities",
    "check_system_matrix_relations",
    "check_filter_equivalence",
    "group_identity_errors",
    "random_ins_element",
    "run_all",
]
