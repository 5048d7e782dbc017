import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semnav.generators import SMALL_FAMILIES, generate_environment  # noqa: E402
from semnav.gridworld import make_environment  # noqa: E402


@pytest.fixture(scope="session")
def small_envs():
    return {fam.value: generate_environment(fam, 1) for fam in SMALL_FAMILIES}


@pytest.fixture
def corridor():
    """A 3x7 corridor with doors 101..106 above and below and a sign."""
    return make_environment(
        [
            "#.#.#.#",
            ".......",
            "#.#.#.#",
        ],
        start=(1, 0),
        name="corridor",
        doors={(0, 1): "101", (0, 3): "103", (0, 5): "105", (2, 1): "102", (2, 3): "104", (2, 5): "106"},
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
