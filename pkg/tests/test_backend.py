import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lgekf import _accel
from lgekf.harness import ExperimentConfig, run_trial
from lgekf.sim import TrajectoryConfig

SCRIPT = """
import json
from lgekf import _accel
from lgekf.harness import ExperimentConfig, run_trial
from lgekf.sim import TrajectoryConfig
res = run_trial(ExperimentConfig(trials=1, master_seed=5, trajectory=TrajectoryConfig(duration=1.5)), 0)
print(json.dumps({"backend": _accel.backend_name(), "pairwise": res.pairwise.tolist(),
                  "series": res.series[:, ::100].tolist()}))
"""


def run_subprocess(flag):
    env = dict(os.environ, LGEKF_DISABLE_JIT=flag)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba")])
def test_flag_selects_backend(flag, expected):
    assert run_subprocess(flag)["backend"] == expected


def test_numpy_fallback_matches_compiled():
    assert _accel.backend_name() == ("numpy" if _accel.JIT_DISABLED else "numba")
    here = run_trial(ExperimentConfig(trials=1, master_seed=5, trajectory=TrajectoryConfig(duration=1.5)), 0)
    other = run_subprocess("0" if _accel.JIT_DISABLED else "1")
    np.testing.assert_allclose(here.pairwise, other["pairwise"], rtol=0, atol=1e-10)
    np.testing.assert_allclose(here.series[:, ::100], other["series"], rtol=0, atol=1e-10)
