import math

import pytest

from collab_bai import _kernels


def hoeffding(trials: int, confidence: float = 0.99) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * trials))


@pytest.fixture(params=["jit", "numpy"])
def kernel_path(request, monkeypatch):
    """Run a test once per successive-elimination kernel path."""
    if request.param == "jit" and _kernels.se_scan_numba is None:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_kernels, "JIT_ENABLED", request.param == "jit")
    return request.param


CRITERIA: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number: int, name: str, ok: bool, detail: str) -> bool:
        CRITERIA.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} ({detail})")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
