import os
import subprocess
import sys

import numpy as np
import pytest

from circfilter import CircularModelParams, ExperimentConfig, run_monte_carlo
from circfilter import _backend, _fallback
from circfilter.special import bessel_ratio, script_F


def test_backend_selection():
    assert _backend.get("python") is _fallback
    assert _backend.BACKEND in ("compiled", "python")
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_var_forces_fallback():
    code = "import circfilter; print(circfilter.BACKEND)"
    env = dict(os.environ, CIRCFILTER_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert res.stdout.strip() == "python"


@pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")
def test_special_function_kernels_agree():
    k = np.logspace(-6, 7, 5000)
    c = _backend.get("compiled")
    assert np.allclose(c.bessel_ratio_array(k), bessel_ratio(k), rtol=1e-14, atol=0)
    assert np.allclose(c.script_F_array(k), script_F(k), rtol=1e-13, atol=0)


@pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")
def test_monte_carlo_identical_under_both_backends():
    cfg = ExperimentConfig(CircularModelParams(1.0, 1.0, 10.0), ("circkf", "gauss_adf", "pf(300)"),
                           runs=6, T=1.0, seed=2, record_every=10)
    fast = run_monte_carlo(cfg)
    env = dict(os.environ, CIRCFILTER_PURE_PYTHON="1")
    code = (
        "import numpy as np, circfilter as c\n"
        "cfg = c.ExperimentConfig(c.CircularModelParams(1.0, 1.0, 10.0), ('circkf', 'gauss_adf', 'pf(300)'),"
        " runs=6, T=1.0, seed=2, record_every=10)\n"
        "s = c.run_monte_carlo(cfg)\n"
        "print(c.BACKEND)\n"
        "for n in cfg.filters: print(' '.join(repr(float(x)) for x in s.filters[n].r_mean))\n"
    )
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    lines = res.stdout.strip().splitlines()
    assert lines[0] == "python"
    for name, line in zip(cfg.filters, lines[1:]):
        slow = np.array([float(x) for x in line.split()])
        assert np.allclose(slow, fast.filters[name].r_mean, rtol=0, atol=1e-12)
