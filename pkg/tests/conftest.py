from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iqm_lab.worlds import WorldSpec, build_world  # noqa: E402


@pytest.fixture
def die():
    return build_world(WorldSpec.make("classical_die"))


@pytest.fixture
def qubit():
    return build_world(WorldSpec.make("qubit"))


@pytest.fixture
def singlet():
    return build_world(WorldSpec.make("singlet_pair"))


@pytest.fixture
def coins():
    return build_world(WorldSpec.make("coin_pair"))


@pytest.fixture
def particle():
    return build_world(WorldSpec.make("free_particle"))


@pytest.fixture
def slits():
    return build_world(WorldSpec.make("double_slit"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
