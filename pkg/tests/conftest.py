import numpy as np
import pytest

from flynet.dataset import FRAME_SIZE


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_frames(rng):
    def make(count):
        return rng.random((count, FRAME_SIZE))
    return make


def central_difference(f, params, step=1e-5):
    """Numeric gradient of scalar f() w.r.t. every entry of each array in ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = f()
            flat[i] = old - step
            down = f()
            flat[i] = old
            gflat[i] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


@pytest.fixture
def gradcheck():
    return central_difference, max_relative_error


# --- acceptance report ---------------------------------------------------
# one line per acceptance criterion, printed after the run

_criteria: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria.setdefault(name, report.outcome)
        if report.outcome != "passed":
            _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        number, _, title = name[len("test_criterion_"):].partition("_")
        verdict = "PASS" if _criteria[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {int(number):2d} {title.replace('_', ' '):32s} {verdict}")
