import sys
from pathlib import Path

import numpy as np
import pytest

from sbsteg.image_core import load_image

DESK = Path(__file__).parent / "data" / "desk"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_dir():
    return DESK


@pytest.fixture(scope="session")
def natural_images():
    """A couple dozen 64x64 colour photographs from the committed fixture."""
    paths = sorted(DESK.glob("*.png"))[:24]
    return [load_image(p) for p in paths]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
