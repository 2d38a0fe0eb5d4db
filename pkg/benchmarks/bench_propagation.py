"""Compare the numba and pure-numpy backends on the filter propagation loop.

Runs itself in two child processes, one per backend, because the backend is
fixed when ``lgekf`` is imported. Each child simulates one trial, propagates
a left and a right full-order filter through its IMU samples and reports the
best wall time over ``--repeat`` runs together with the final estimates, so
the parent can also confirm that both backends agree.

    python benchmarks/bench_propagation.py --seconds 2 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def measure(seconds, repeat):
    from lgekf import _accel
    from lgekf.harness import ExperimentConfig
    from lgekf.ins import InsFilter, InsModel
    from lgekf.sim import TrajectoryConfig, simulate_trial

    cfg = ExperimentConfig(trials=1, trajectory=TrajectoryConfig(duration=seconds))
    model = InsModel(cfg.noise)
    trial = simulate_trial(cfg.trajectory, cfg.noise, cfg.initial_covariance, cfg.master_seed, 0, model)
    f, w = trial.sensors.f_imu, trial.sensors.w_imu
    filters = [(InsFilter(model, cfg.filter_config(label)), state)
               for label, state in (("L-FO", trial.left), ("R-FO", trial.right))]

    # first call compiles (or loads the numba cache); keep it out of the timing
    t0 = time.perf_counter()
    for filt, state in filters:
        filt.propagate_imu(state, f[:10], w[:10])
    warmup = time.perf_counter() - t0

    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        finals = [filt.propagate_imu(state, f, w)[0] for filt, state in filters]
        best = min(best, time.perf_counter() - t0)
    return {
        "backend": _accel.backend_name(),
        "steps": int(f.shape[0]),
        "warmup_s": warmup,
        "best_s": best,
        "estimates": [s.estimate.tolist() for s in finals],
        "covs": [s.cov.tolist() for s in finals],
    }


def run_child(disable_jit, seconds, repeat):
    env = dict(os.environ, LGEKF_DISABLE_JIT="1" if disable_jit else "0")
    out = subprocess.run(
        [sys.executable, __file__, "--child", "--seconds", str(seconds), "--repeat", str(repeat)],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, default=2.0, help="simulated duration (1 kHz IMU)")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.child:
        print(json.dumps(measure(args.seconds, args.repeat)))
        return 0

    results = [run_child(False, args.seconds, args.repeat), run_child(True, args.seconds, args.repeat)]
    print(f"{'backend':<8} {'steps':>7} {'warmup [s]':>11} {'best [s]':>9} {'us/step/filter':>15}")
    for r in results:
        per_step = 1e6 * r["best_s"] / (2 * r["steps"])
        print(f"{r['backend']:<8} {r['steps']:>7} {r['warmup_s']:>11.3f} {r['best_s']:>9.3f} {per_step:>15.1f}")
    jit, ref = results
    print(f"speedup: {ref['best_s'] / jit['best_s']:.1f}x")
    est_gap = np.max(np.abs(np.array(jit["estimates"]) - np.array(ref["estimates"])))
    cov_gap = np.max(np.abs(np.array(jit["covs"]) - np.array(ref["covs"])))
    print(f"max backend difference: estimate {est_gap:.2e}, covariance {cov_gap:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
