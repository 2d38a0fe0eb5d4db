"""Ground truth and sensor simulation for the INS/GNSS scenario.

Random streams
--------------
Every trial owns four independent PCG64 generators derived from
``SeedSequence(master_seed, spawn_key=(trial_index,)).spawn(4)``, in the
order inputs, process noise, sensor noise, initialization. The spawn key
makes trials pairwise independent and lets any trial be regenerated on its
own, whatever the worker layout.

Noise convention
----------------
A white noise of density ``sigma`` sampled at step ``dt`` has per-sample
variance ``sigma**2 / dt``.

Truth dynamics
--------------
The true vehicle is driven by the true specific force and body rate, held
constant across each IMU interval. Attitude, velocity and position take the
exact flow of the strapdown equations for constant inputs; the biases follow
their Gauss-Markov model with an Euler-Maruyama step. IMU readings add the
current biases and white noise to the true inputs, so the filter sees the
same noise realization that separates its model from the truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.signal

from . import _kernels as K
from .ekf import FilterState, initial_state_pair
from .gaussian import BODY, ExtendedConcentratedGaussian, sample
from .ins import InitialCovariance, InsModel, InsNoiseParams, matrix_to_nav, nav_from_parts, nav_to_matrix

STREAM_NAMES = ("inputs", "process", "sensors", "init")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Timing and input-profile settings of one simulated trajectory.

    Inputs are per-axis stationary Gauss-Markov (low-pass filtered white)
    processes with time constant ``input_time_constant`` and standard
    deviations ``accel_std`` and ``rate_std``. The defaults give an ensemble
    mean specific-force magnitude near 2.1 m/s^2 and mean rate magnitude near
    0.16 rad/s.
    """

    duration: float = 10.0
    imu_rate: float = 1000.0
    gnss_rate: float = 1.0
    input_time_constant: float = 1.0
    accel_std: float = 1.33
    rate_std: float = 0.1
    reorth_every: int = 1000

    def __post_init__(self):
        if not (self.duration > 0 and self.imu_rate > 0 and self.gnss_rate > 0):
            raise ValueError("duration and rates must be positive")
        if self.input_time_constant <= 0:
            raise ValueError("input_time_constant must be positive")
        if self.accel_std < 0 or self.rate_std < 0:
            raise ValueError("input standard deviations must be non-negative")
        if self.reorth_every < 0:
            raise ValueError("reorth_every must be non-negative")
        steps = self.duration * self.imu_rate
        ratio = self.imu_rate / self.gnss_rate
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError("duration * imu_rate must be an integer")
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("imu_rate must be an integer multiple of gnss_rate")

    @property
    def dt(self):
        return 1.0 / self.imu_rate

    @property
    def steps(self):
        return int(round(self.duration * self.imu_rate))

    @property
    def gnss_every(self):
        return int(round(self.imu_rate / self.gnss_rate))

    @property
    def gnss_steps(self):
        """IMU-grid indices of the GNSS fixes (the first one after one period)."""
        return np.arange(self.gnss_every, self.steps + 1, self.gnss_every)

    def times(self):
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class TrialStreams:
    inputs: np.random.Generator
    process: np.random.Generator
    sensors: np.random.Generator
    init: np.random.Generator


def trial_streams(master_seed, trial_index):
    """Independent generators for one trial (see module docstring)."""
    if master_seed < 0 or trial_index < 0:
        raise ValueError("seeds and trial indices must be non-negative")
    root = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    gens = [np.random.Generator(np.random.PCG64(s)) for s in root.spawn(len(STREAM_NAMES))]
    return TrialStreams(*gens)


def white_noise(rng, sigma, dt, shape):
    """Samples of a white noise with density ``sigma`` at step ``dt``."""
    return rng.standard_normal(shape) * (sigma / np.sqrt(dt))


def lowpass_noise(rng, n, dt, tau, std, dim=3):
    """Stationary first-order Gauss-Markov sequence, exactly discretized.

    ``x[k+1] = alpha x[k] + sqrt(1 - alpha^2) std e[k]`` with
    ``alpha = exp(-dt / tau)``; ``x[0]`` comes from the stationary law.
    """
    e = rng.standard_normal((n, dim))
    if std == 0:
        return np.zeros((n, dim))
    alpha = np.exp(-dt / tau)
    drive = np.sqrt(1.0 - alpha**2) * std * e
    drive[0] = std * e[0]
    return scipy.signal.lfilter([1.0], [1.0, -alpha], drive, axis=0)


def generate_inputs(cfg: TrajectoryConfig, rng):
    """True specific force and body rate, each ``(steps, 3)``."""
    f = lowpass_noise(rng, cfg.steps, cfg.dt, cfg.input_time_constant, cfg.accel_std)
    w = lowpass_noise(rng, cfg.steps, cfg.dt, cfg.input_time_constant, cfg.rate_std)
    return f, w


@dataclass
class TruthRecord:
    """True states on the IMU grid and the inputs that produced them.

    ``states`` has ``steps + 1`` rows of nav vectors; ``f_body[k]`` and
    ``w_body[k]`` are held over ``[t[k], t[k+1])``.
    """

    t: np.ndarray
    states: np.ndarray
    f_body: np.ndarray
    w_body: np.ndarray

    def element(self, k):
        return nav_to_matrix(self.states[k])


@dataclass
class SensorData:
    f_imu: np.ndarray
    w_imu: np.ndarray
    gnss_steps: np.ndarray
    gnss: np.ndarray

    @property
    def imu_count(self):
        return self.f_imu.shape[0]

    @property
    def gnss_count(self):
        return self.gnss.shape[0]


def initial_truth_state(params_init: InitialCovariance, rng):
    """Identity attitude, zero velocity and position, random biases."""
    b_f = rng.standard_normal(3) * params_init.std_bias_f
    b_w = rng.standard_normal(3) * params_init.std_bias_omega
    return nav_from_parts(b_f=b_f, b_w=b_w)


def simulate_truth(cfg: TrajectoryConfig, params: InsNoiseParams, f_body, w_body, x0, rng):
    """Integrate the truth from nav vector ``x0`` under the given inputs."""
    f_body = np.ascontiguousarray(f_body, dtype=float)
    w_body = np.ascontiguousarray(w_body, dtype=float)
    n = cfg.steps
    if f_body.shape != (n, 3) or w_body.shape != (n, 3):
        raise ValueError(f"inputs must have shape ({n}, 3)")
    bias_noise = np.empty((n, 6))
    bias_noise[:, 0:3] = white_noise(rng, params.sigma_bf, cfg.dt, (n, 3))
    bias_noise[:, 3:6] = white_noise(rng, params.sigma_bomega, cfg.dt, (n, 3))
    xs = np.empty((n + 1, K.NAV_SIZE))
    K.simulate_truth(
        np.ascontiguousarray(x0, dtype=float), f_body, w_body, bias_noise, cfg.dt,
        np.asarray(params.gravity, dtype=float), params.tau_bf, params.tau_bomega,
        int(cfg.reorth_every), xs,
    )
    return TruthRecord(cfg.times(), xs, f_body, w_body)


def sample_sensors(truth: TruthRecord, cfg: TrajectoryConfig, params: InsNoiseParams, rng):
    """IMU samples on every interval and GNSS fixes every ``gnss_every`` steps."""
    n = cfg.steps
    w_f = white_noise(rng, params.sigma_f, cfg.dt, (n, 3))
    w_w = white_noise(rng, params.sigma_omega, cfg.dt, (n, 3))
    f_imu = truth.f_body + truth.states[:n, 15:18] + w_f
    w_imu = truth.w_body + truth.states[:n, 18:21] + w_w
    idx = cfg.gnss_steps
    nu = rng.standard_normal((idx.size, 3)) * params.sigma_y
    gnss = truth.states[idx, 12:15] + nu
    return SensorData(f_imu, w_imu, idx, gnss)


def initialize_filters(truth: TruthRecord, P0, rng, model: InsModel | None = None):
    """Shared initial estimate drawn around the true initial state.

    Returns matched ``(left, right)`` filter states: the left covariance is
    ``P0`` and the right one ``Ad(g0) P0 Ad(g0)^T``.
    """
    model = InsModel() if model is None else model
    G = model.group
    dist = ExtendedConcentratedGaussian(G, truth.element(0), np.zeros(G.k), P0, BODY)
    g0 = sample(dist, rng)
    return initial_state_pair(G, g0, P0)


@dataclass
class Trial:
    truth: TruthRecord
    sensors: SensorData
    left: FilterState
    right: FilterState


def simulate_trial(cfg: TrajectoryConfig, params: InsNoiseParams, init: InitialCovariance,
                   master_seed, trial_index, model: InsModel | None = None):
    """Truth, sensor data and initial filter states for one Monte Carlo trial."""
    streams = trial_streams(master_seed, trial_index)
    f_body, w_body = generate_inputs(cfg, streams.inputs)
    x0 = initial_truth_state(init, streams.init)
    truth = simulate_truth(cfg, params, f_body, w_body, x0, streams.process)
    sensors = sample_sensors(truth, cfg, params, streams.sensors)
    left, right = initialize_filters(truth, init.matrix(), streams.init, model)
    return Trial(truth, sensors, left, right)


def truth_csv_columns():
    cols = ["t"] + [f"R{i}{j}" for i in range(3) for j in range(3)]
    for name in ("v", "p", "b_f", "b_w", "f_imu", "w_imu", "gnss"):
        cols += [f"{name}_{a}" for a in "xyz"]
    return cols


def write_truth_csv(path, truth: TruthRecord, sensors: SensorData):
    """One row per IMU-grid time; IMU columns hold the sample starting at
    that time (empty on the last row) and GNSS columns are empty between fixes.
    """
    n = truth.states.shape[0]
    imu = np.full((n, 6), np.nan)
    imu[:-1, 0:3] = sensors.f_imu
    imu[:-1, 3:6] = sensors.w_imu
    gnss = np.full((n, 3), np.nan)
    gnss[sensors.gnss_steps] = sensors.gnss
    table = np.column_stack([truth.t, truth.states, imu, gnss])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(truth_csv_columns())
        for row in table:
            writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def truth_matrix(states):
    """Stack of group elements for an array of nav vectors."""
    return np.stack([nav_to_matrix(x) for x in states])


__all__ = [
    "TrajectoryConfig",
    "TrialStreams",
    "TruthRecord",
    "SensorData",
    "Trial",
    "trial_streams",
    "white_noise",
    "lowpass_noise",
    "generate_inputs",
    "initial_truth_state",
    "simulate_truth",
    "sample_sensors",
    "initialize_filters",
    "simulate_trial",
    "write_truth_csv",
    "matrix_to_nav",
]
