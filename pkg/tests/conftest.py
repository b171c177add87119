import numpy as np
import pytest

from ehldg import mesh as meshmod
from ehldg.dgspace import DgSpace


def make_space(bounds=((0.0, 1.0),), cells=(4,), degree=1):
    return DgSpace(meshmod.build(meshmod.DomainSpec(bounds, cells), degree))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = []  # (criterion, passed, detail), filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
