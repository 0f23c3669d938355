import numpy as np
import pytest

from mutualloc.state import ROBOT_DIM, SystemState, pin_reference


def random_spd(rng, n, scale=1.0, cond=10.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    w = scale * np.exp(rng.uniform(0.0, np.log(cond), n))
    return (Q * w) @ Q.T


def random_state(rng, n_robots, pos_sd=0.3, yaw_sd=0.1, spread=3.0):
    """A moderately uncertain joint belief with robot 0 pinned."""
    x = np.zeros(ROBOT_DIM * n_robots)
    r = x.reshape(n_robots, ROBOT_DIM)
    r[:, 0:3] = rng.uniform(-spread, spread, (n_robots, 3))
    r[:, 4:7] = rng.uniform(-spread, spread, (n_robots, 3))
    r[:, 7] = rng.uniform(-np.pi, np.pi, n_robots)
    r[:, 3] = rng.uniform(-np.pi, np.pi, n_robots)
    d = np.tile([pos_sd] * 3 + [yaw_sd] + [pos_sd] * 3 + [yaw_sd], n_robots) ** 2
    A = rng.normal(size=(x.size, x.size)) * 0.05
    P = np.diag(d) + 0.2 * np.sqrt(np.outer(d, d)) * np.tanh(A @ A.T)
    w, V = np.linalg.eigh(P)
    P = (V * np.clip(w, 1e-6 * w.max(), None)) @ V.T
    return pin_reference(SystemState(x, P))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def report_criterion(number, title, ok, detail):
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES[number] = "[%s] criterion %2d %s: %s" % (
        "PASS" if ok else "FAIL", number, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
