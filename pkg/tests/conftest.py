import numpy as np
import pytest

from qheat.linalg import eig_hermitian
from qheat.model import EnergySpectrum, InitialState, Observable, spin1_operators

FIG2_C = (0.8, 0.01, 0.19)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def spin1_system():
    """H = Sz + Sx/2 with the observable Sz, as (eigensystem, spectrum, observable)."""
    sz, sx = spin1_operators()
    h = eig_hermitian(sz + 0.5 * sx)
    return h, EnergySpectrum.from_eigensystem(h), Observable.from_matrix(sz, h)


@pytest.fixture(scope="session")
def fig2_state():
    return InitialState(np.array(FIG2_C))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and fail the test on FAIL."""

    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
