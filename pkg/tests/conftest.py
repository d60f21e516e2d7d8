import os

import pytest
from hypothesis import settings

# numba compiles on first call, which would trip per-example deadlines
settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXTENDED_ENV = "CRYSTALSPIRAL_EXTENDED"


def pytest_collection_modifyitems(config, items):
    if os.environ.get(EXTENDED_ENV) == "1":
        return
    skip = pytest.mark.skip(reason=f"extended tier; set {EXTENDED_ENV}=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    def record(label: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
