import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lswsim import SimConfig, integrate, make_ordering  # noqa: E402

#: (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0][1:])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="session")
def two_particles():
    return make_ordering([(2.0, 0.5), (0.5, 0.5)])


@pytest.fixture(scope="session")
def two_particle_run(two_particles):
    return integrate(SimConfig(two_particles, horizon=3.0, keep_dense=True, snapshot_interval=0.01))
