import math

import pytest

from moltweezer.params import derive_params, nacs_tweezers, preset

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def nacs():
    return preset("nacs")


@pytest.fixture(scope="session")
def params(nacs):
    return derive_params(nacs, nacs_tweezers())


@pytest.fixture(scope="session")
def omega():
    return 2 * math.pi * 50e3


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
