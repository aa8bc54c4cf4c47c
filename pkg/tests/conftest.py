import numpy as np
import pytest

from spdqml import _backend, qsim


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["python", "compiled"])
def backend(request, monkeypatch):
    """Run a test against each kernel implementation."""
    if request.param == "compiled":
        if _backend.compiled_kernels is None:
            pytest.skip("compiled extension not built")
        impl = _backend.compiled_kernels
    else:
        impl = _backend.python_kernels
    monkeypatch.setattr(qsim, "kernels", impl)
    return request.param


def pytest_configure(config):
    config.acceptance_results = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
