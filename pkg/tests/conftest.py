"""Shared test helpers and the acceptance-criteria terminal report."""

from __future__ import annotations

import numpy as np
import pytest

_ACCEPTANCE: list[tuple[str, str, bool]] = []


@pytest.fixture
def acceptance_report():
    """Record one (criterion, detail, passed) line for the terminal summary.

    Tests record before asserting so a failing criterion still prints its
    line with FAIL.
    """

    def record(name: str, detail: str, passed: bool) -> None:
        _ACCEPTANCE.append((name, detail, bool(passed)))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, detail, passed in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")


@pytest.fixture
def normal_equations_ridge():
    """Independent ridge oracle: solve (Phi^T Phi + ridge I) a = Phi^T y."""

    def solve(phi: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
        n = phi.shape[1]
        return np.linalg.solve(phi.T @ phi + ridge * np.eye(n), phi.T @ y)

    return solve
