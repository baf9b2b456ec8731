from __future__ import annotations

import os
import warnings

import pytest

warnings.filterwarnings("ignore", module="numba")

from r2cs.conic import ConicFrame  # noqa: E402
from r2cs.field import cached_tower  # noqa: E402

SLOW = os.environ.get("R2CS_SLOW") == "1"

# lines emitted by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    if SLOW:
        return
    skip = pytest.mark.skip(reason="long run; set R2CS_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


_frames: dict = {}


def frame_for(p: int, e: int, n: int) -> ConicFrame:
    key = (p, e, n)
    if key not in _frames:
        _frames[key] = ConicFrame(cached_tower(p, e, n))
    return _frames[key]


@pytest.fixture(scope="session")
def frame81() -> ConicFrame:
    return frame_for(3, 1, 4)


@pytest.fixture(scope="session")
def F81(frame81):
    return frame81.F


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("r2cs-cache"))
