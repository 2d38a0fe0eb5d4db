"""Monte Carlo experiments: run every filter variant on shared simulated data.

Each trial simulates one truth trajectory and its sensor data, draws one
initial estimate, and runs the requested variants on identical inputs.
Errors are evaluated on the IMU grid at steps ``1..K``; at a GNSS step the
post-update estimate is used.

Error metric between two INS states::

    e = |p1 - p2| + |v1 - v2| + angle(R2^T R1) + |bf1 - bf2| + |bw1 - bw2|

with the position and orientation errors being the first and third terms.
Percentiles across trials use the nearest-rank rule.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ._accel import backend_name
from .ekf import VARIANTS, FilterConfig, NumericalFailure
from .gaussian import CovarianceError
from .ins import InitialCovariance, InsFilter, InsModel, InsNoiseParams, matrix_to_nav
from .sim import TrajectoryConfig, simulate_trial

TRUTH = "truth"
METRICS = ("total", "position", "orientation")
DIVERGENCE_THRESHOLD = 1e6
PERCENTILE = 95


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 100
    master_seed: int = 20240601
    workers: int = 1
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    noise: InsNoiseParams = field(default_factory=InsNoiseParams)
    initial_covariance: InitialCovariance = field(default_factory=InitialCovariance)
    variants: tuple = VARIANTS
    integrator: str = "transport"
    derivative_mode: str = "analytic"
    output_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if not self.variants:
            raise ConfigError("at least one filter variant is required")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown filter variants {bad}; choose from {VARIANTS}")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("filter variants must be unique")
        try:
            self.filter_config(self.variants[0])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def filter_config(self, label):
        return FilterConfig.from_label(
            label, dt=self.trajectory.dt, integrator=self.integrator, derivative_mode=self.derivative_mode
        )

    def to_dict(self):
        noise = asdict(self.noise)
        noise["gravity"] = list(noise["gravity"])
        return {
            "trials": self.trials,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "trajectory": asdict(self.trajectory),
            "noise": noise,
            "initial_covariance": asdict(self.initial_covariance),
            "filters": {
                "variants": list(self.variants),
                "integrator": self.integrator,
                "derivative_mode": self.derivative_mode,
            },
            "output": {"directory": self.output_dir},
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        top = {"trials", "master_seed", "workers", "trajectory", "noise", "initial_covariance", "filters", "output"}
        _reject_unknown(data, top, "top level")
        kwargs = {k: data[k] for k in ("trials", "master_seed", "workers") if k in data}
        for key in ("trials", "master_seed", "workers"):
            if key in kwargs and (isinstance(kwargs[key], bool) or not isinstance(kwargs[key], int)):
                raise ConfigError(f"{key} must be an integer")
        sections = {
            "trajectory": TrajectoryConfig,
            "noise": InsNoiseParams,
            "initial_covariance": InitialCovariance,
        }
        for name, typ in sections.items():
            if name in data:
                kwargs[name] = _build_section(typ, data[name], name)
        filters = data.get("filters", {})
        _reject_unknown(filters, {"variants", "integrator", "derivative_mode"}, "filters")
        if "variants" in filters:
            kwargs["variants"] = tuple(filters["variants"])
        for key in ("integrator", "derivative_mode"):
            if key in filters:
                kwargs[key] = filters[key]
        output = data.get("output", {})
        _reject_unknown(output, {"directory"}, "output")
        if "directory" in output:
            kwargs["output_dir"] = str(output["directory"])
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **overrides):
        data = self.to_dict()
        for key in ("trials", "master_seed", "workers"):
            if overrides.get(key) is not None:
                data[key] = overrides[key]
        if overrides.get("variants") is not None:
            data["filters"]["variants"] = list(overrides["variants"])
        if overrides.get("output_dir") is not None:
            data["output"]["directory"] = str(overrides["output_dir"])
        return ExperimentConfig.from_dict(data)


def _reject_unknown(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _build_section(typ, data, name):
    allowed = {f.name for f in fields(typ)}
    _reject_unknown(data, allowed, name)
    values = dict(data)
    if "gravity" in values:
        values["gravity"] = tuple(float(x) for x in values["gravity"])
    try:
        return typ(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def _as_nav(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] == (13, 13):
        return matrix_to_nav(x) if x.ndim == 2 else np.stack([matrix_to_nav(g) for g in x])
    return x


def rotation_angles(R1, R2):
    """Angle of ``R2^T R1`` for stacks of rotations, stable near 0 and pi."""
    Rrel = np.einsum("...ji,...jk->...ik", R2, R1)
    cos = 0.5 * (np.trace(Rrel, axis1=-2, axis2=-1) - 1.0)
    skew = np.stack(
        [Rrel[..., 2, 1] - Rrel[..., 1, 2], Rrel[..., 0, 2] - Rrel[..., 2, 0], Rrel[..., 1, 0] - Rrel[..., 0, 1]],
        axis=-1,
    )
    sin = 0.5 * np.linalg.norm(skew, axis=-1)
    return np.arctan2(sin, cos)


def error_terms(x1, x2):
    """Per-state error terms ``(position, velocity, orientation, b_f, b_w)``.

    Accepts nav vectors or 13x13 elements, single or stacked along axis 0.
    """
    x1, x2 = _as_nav(x1), _as_nav(x2)
    if x1.shape != x2.shape:
        raise ValueError(f"trajectory shapes differ: {x1.shape} vs {x2.shape}")
    R1 = x1[..., 0:9].reshape(x1.shape[:-1] + (3, 3))
    R2 = x2[..., 0:9].reshape(x2.shape[:-1] + (3, 3))
    return np.stack(
        [
            np.linalg.norm(x1[..., 12:15] - x2[..., 12:15], axis=-1),
            np.linalg.norm(x1[..., 9:12] - x2[..., 9:12], axis=-1),
            rotation_angles(R1, R2),
            np.linalg.norm(x1[..., 15:18] - x2[..., 15:18], axis=-1),
            np.linalg.norm(x1[..., 18:21] - x2[..., 18:21], axis=-1),
        ],
        axis=-1,
    )


def total_error(x1, x2):
    return error_terms(x1, x2).sum(axis=-1)


def position_error(x1, x2):
    return error_terms(x1, x2)[..., 0]


def orientation_error(x1, x2):
    return error_terms(x1, x2)[..., 2]


def metric_series(x1, x2):
    """``(K, 3)`` array of total, position and orientation errors."""
    terms = error_terms(x1, x2)
    return np.column_stack([terms.sum(axis=-1), terms[..., 0], terms[..., 2]])


def mae(errors):
    """Mean of a per-step error series."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("empty error series")
    return float(np.mean(errors))


def trajectory_mae(traj1, traj2, metric=total_error):
    traj1, traj2 = _as_nav(traj1), _as_nav(traj2)
    if traj1.shape[0] != traj2.shape[0]:
        raise ValueError(f"trajectory lengths differ: {traj1.shape[0]} vs {traj2.shape[0]}")
    return mae(metric(traj1, traj2))


def nearest_rank_percentile(values, q, axis=0):
    return np.percentile(values, q, axis=axis, method="inverted_cdf")


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------


@dataclass
class FilterRun:
    """Estimates on the IMU grid (``K + 1`` nav vectors) and failure info."""

    states: np.ndarray
    covs: np.ndarray | None = field(default=None, repr=False)
    failure: str | None = None
    failed_at: float | None = None


def run_filter(filt: InsFilter, trial, record_cov=False):
    """Run one filter over a trial's sensor data.

    On a numerical failure the last good estimate is held for the rest of
    the trajectory and the failure is reported.
    """
    cfg_steps = trial.sensors.f_imu.shape[0]
    every = int(trial.sensors.gnss_steps[0]) if trial.sensors.gnss_count else cfg_steps
    state = trial.left if filt.side == "left" else trial.right
    states = np.empty((cfg_steps + 1, 21))
    states[0] = matrix_to_nav(state.estimate)
    covs = [state.cov] if record_cov else None
    updates = {int(k): j for j, k in enumerate(trial.sensors.gnss_steps)}
    k = 0
    try:
        while k < cfg_steps:
            stop = min(cfg_steps, (k // every + 1) * every)
            state, rec = filt.propagate_imu(
                state, trial.sensors.f_imu[k:stop], trial.sensors.w_imu[k:stop], record_cov=record_cov
            )
            states[k + 1:stop + 1] = rec.states[1:]
            if record_cov:
                covs.extend(rec.covs[1:])
            k = stop
            if k in updates:
                state = filt.update(state, trial.sensors.gnss[updates[k]])
                states[k] = matrix_to_nav(state.estimate)
                if record_cov:
                    covs[-1] = state.cov
    except (NumericalFailure, CovarianceError, np.linalg.LinAlgError) as exc:
        states[k + 1:] = states[k]
        return FilterRun(states, None, str(exc), k * filt.config.dt)
    return FilterRun(states, np.array(covs) if record_cov else None)


@dataclass
class TrialResult:
    index: int
    labels: tuple
    pairwise: np.ndarray
    vs_truth: np.ndarray
    series: np.ndarray = field(repr=False)
    diverged: dict
    failures: dict
    max_equivalence_error: float | None = None


def _diverged(run, err_total):
    if run.failure is not None:
        return True
    if not np.all(np.isfinite(run.states)):
        return True
    return bool(np.nanmax(err_total) > DIVERGENCE_THRESHOLD)


def run_trial(cfg: ExperimentConfig, index: int) -> TrialResult:
    model = InsModel(cfg.noise)
    trial = simulate_trial(cfg.trajectory, cfg.noise, cfg.initial_covariance, cfg.master_seed, index, model)
    runs = {}
    for label in cfg.variants:
        runs[label] = run_filter(InsFilter(model, cfg.filter_config(label)), trial)
    labels = tuple(cfg.variants) + (TRUTH,)
    trajs = [runs[v].states[1:] for v in cfg.variants] + [trial.truth.states[1:]]
    n = len(labels)
    pairwise = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            pairwise[i, j] = pairwise[j, i] = mae(total_error(trajs[i], trajs[j]))
    series = np.stack([metric_series(trajs[i], trajs[-1]) for i in range(n - 1)])
    vs_truth = series.mean(axis=1)
    diverged = {v: _diverged(runs[v], series[i, :, 0]) for i, v in enumerate(cfg.variants)}
    failures = {v: runs[v].failure for v in cfg.variants if runs[v].failure}
    eq = None
    if "L-FO" in runs and "R-FO" in runs:
        eq = float(np.max(total_error(runs["L-FO"].states, runs["R-FO"].states)))
    return TrialResult(index, labels, pairwise, vs_truth, series, diverged, failures, eq)


def _run_trial_star(args):
    return run_trial(*args)


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    labels: tuple
    pairwise: np.ndarray
    vs_truth: np.ndarray
    series_mean: np.ndarray = field(repr=False)
    series_p95: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    divergences: dict
    failures: dict
    equivalence_max: list
    elapsed: float

    @property
    def variants(self):
        return self.labels[:-1]

    def ranking(self):
        """Variants sorted by average total error against the truth."""
        order = np.argsort(self.vs_truth[:, 0], kind="stable")
        return [(self.variants[i], float(self.vs_truth[i, 0])) for i in order]

    def full_order_best(self):
        """True when the full-order variants take the top places."""
        fo = [v for v in self.variants if v.endswith("FO")]
        if not fo or len(fo) == len(self.variants):
            return None
        top = [name for name, _ in self.ranking()[: len(fo)]]
        return set(top) == set(fo)

    def pairwise_value(self, a, b):
        return float(self.pairwise[self.labels.index(a), self.labels.index(b)])


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """Run all trials (in parallel when ``cfg.workers > 1``) and aggregate.

    Aggregation is ordered by trial index, so results do not depend on the
    worker count or scheduling.
    """
    start = time.perf_counter()
    jobs = [(cfg, i) for i in range(cfg.trials)]
    results = []
    if cfg.workers == 1:
        for job in jobs:
            results.append(_run_trial_star(job))
            if progress:
                progress(len(results), cfg.trials)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for res in pool.map(_run_trial_star, jobs):
                results.append(res)
                if progress:
                    progress(len(results), cfg.trials)
    results.sort(key=lambda r: r.index)
    labels = results[0].labels
    pairwise = np.mean([r.pairwise for r in results], axis=0)
    vs_truth = np.mean([r.vs_truth for r in results], axis=0)
    series = np.stack([r.series for r in results])  # trials x filters x K x metrics
    series_mean = series.mean(axis=0)
    series_p95 = nearest_rank_percentile(series, PERCENTILE, axis=0)
    divergences = {v: [r.index for r in results if r.diverged[v]] for v in labels[:-1]}
    failures = {f"{r.index}:{v}": msg for r in results for v, msg in r.failures.items()}
    eq = [r.max_equivalence_error for r in results]
    times = cfg.trajectory.times()[1:]
    return ExperimentResult(
        cfg, labels, pairwise, vs_truth, series_mean, series_p95, times, divergences, failures, eq,
        time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(x):
    """Shortest round-trip decimal, so equal floats give equal bytes."""
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _versions():
    import numba
    import scipy

    from . import __version__

    return {
        "lgekf": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def write_outputs(result: ExperimentResult, out_dir=None):
    """Write the manifest, error tables and percentile series; return paths."""
    out = Path(out_dir if out_dir is not None else result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = result.labels
    paths = {}

    paths["pairwise"] = out / "pairwise_mae.csv"
    _write_csv(
        paths["pairwise"], ["filter", *labels],
        [[a, *(_fmt(x) for x in row)] for a, row in zip(labels, result.pairwise)],
    )

    paths["vs_truth"] = out / "vs_truth_mae.csv"
    _write_csv(
        paths["vs_truth"], ["filter", *METRICS],
        [[v, *(_fmt(x) for x in row)] for v, row in zip(result.variants, result.vs_truth)],
    )

    for m, metric in enumerate(METRICS):
        key = f"series_{metric}"
        paths[key] = out / f"error_series_{metric}.csv"
        header = ["t"]
        for v in result.variants:
            header += [f"{v}_mean", f"{v}_p{PERCENTILE}"]
        rows = []
        for k, t in enumerate(result.times):
            row = [_fmt(t)]
            for i in range(len(result.variants)):
                row += [_fmt(result.series_mean[i, k, m]), _fmt(result.series_p95[i, k, m])]
            rows.append(row)
        _write_csv(paths[key], header, rows)

    paths["manifest"] = out / "manifest.json"
    manifest = {
        "config": result.config.to_dict(),
        "versions": _versions(),
        "backend": backend_name(),
        "master_seed": result.config.master_seed,
        "trials": result.config.trials,
        "ranking": result.ranking(),
        "full_order_best": result.full_order_best(),
        "divergences": result.divergences,
        "failures": result.failures,
        "max_lfo_rfo_error": (
            max(e for e in result.equivalence_max if e is not None)
            if any(e is not None for e in result.equivalence_max)
            else None
        ),
        "elapsed_seconds": round(result.elapsed, 3),
        "argv": sys.argv,
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return paths


def format_summary(result: ExperimentResult):
    lines = [f"{result.config.trials} trials in {result.elapsed:.1f} s ({backend_name()} backend)"]
    lines.append("average total MAE against truth:")
    for rank, (name, val) in enumerate(result.ranking(), 1):
        flag = f"  diverged in {len(result.divergences[name])} trials" if result.divergences[name] else ""
        lines.append(f"  {rank}. {name:5s} {val:10.4f}{flag}")
    best = result.full_order_best()
    if best is not None:
        lines.append("full-order variants rank first" if best else "WARNING: full-order variants do not rank first")
    if "L-FO" in result.labels and "R-FO" in result.labels:
        worst = max(e for e in result.equivalence_max if e is not None)
        lines.append(f"max |L-FO - R-FO| over all trials and steps: {worst:.3e}")
    return "\n".join(lines)


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "FilterRun",
    "TrialResult",
    "load_config",
    "rotation_angles",
    "error_terms",
    "total_error",
    "position_error",
    "orientation_error",
    "metric_series",
    "mae",
    "trajectory_mae",
    "nearest_rank_percentile",
    "run_filter",
    "run_trial",
    "run_experiment",
    "write_outputs",
    "format_summary",
]
