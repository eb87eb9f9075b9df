import numpy as np
import pytest

from birkhoff_gibbs.core import mass

_ACCEPTANCE_LINES = []


def random_state(rng, n_trunc, scale=1.0, unit_mass=False):
    u = rng.normal(size=2 * n_trunc + 1) + 1j * rng.normal(size=2 * n_trunc + 1)
    if unit_mass:
        u /= np.sqrt(mass(u))
    return scale * u


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_report():
    def report(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {name} -- {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
