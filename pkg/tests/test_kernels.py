import os
import subprocess
import sys

import mpmath
import numpy as np
import pytest

from evtraj import kernels

GRID = np.concatenate([np.linspace(0.5, 10, 40), np.geomspace(10, 100, 20)])


def _table(fn):
    return np.array([float(fn(mpmath.mpf(float(x)))) for x in GRID])


REFERENCE = {
    "lgamma": _table(mpmath.loggamma),
    "digamma": _table(mpmath.digamma),
    "trigamma": _table(lambda x: mpmath.polygamma(1, x)),
}


@pytest.mark.parametrize("backend", sorted(kernels.backends()))
@pytest.mark.parametrize("name", sorted(REFERENCE))
def test_special_functions_match_mpmath(backend, name):
    fn = getattr(kernels.backends()[backend], name)
    np.testing.assert_allclose(fn(GRID), REFERENCE[name], rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("backend", sorted(kernels.backends()))
def test_winner_modes_tie_break(backend):
    fn = kernels.backends()[backend].winner_modes
    gamma = np.zeros((2, 3, 4, 2))
    gt = np.ones((2, 4, 2))
    gamma[1, 2] = 1.0
    np.testing.assert_array_equal(fn(gamma, gt), [0, 2])


def test_softplus_stable():
    x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    out = kernels.softplus(x)
    assert np.all(np.isfinite(out))
    assert out[2] == pytest.approx(np.log(2.0))
    assert out[4] == 800.0


def test_backend_name():
    assert kernels.BACKEND in kernels.backends()


def test_pure_python_switch():
    env = dict(os.environ, EVTRAJ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import evtraj.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
