import numpy as np
import pytest

from curvlab import gallery
from curvlab.config import build_config


@pytest.fixture(scope="session")
def suite_cfg():
    return build_config(gallery.suite(), env={})


@pytest.fixture(scope="session")
def registry(suite_cfg):
    return suite_cfg.registry


def central_fd(f, x, h=1e-5):
    """Central-difference gradient and Hessian of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    n = x.size
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
        for j in range(n):
            u = np.zeros(n)
            u[j] = h
            hess[i, j] = (f(x + e + u) - f(x + e - u) - f(x - e + u) + f(x - e - u)) / (4 * h * h)
    return grad, hess


# criterion number -> summary line, filled by the acceptance suite
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
