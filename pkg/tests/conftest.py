import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from simfilter import toy  # noqa: E402

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        previous = _criteria.get(number, ("PASS", title))[0]
        # a criterion with several tests fails if any of them fails
        if previous == "FAIL":
            status = "FAIL"
        _criteria[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    toy.make_toy_corpus(root)
    toy.write_toy_config(root)
    return root


@pytest.fixture
def toy_copy(toy_root, tmp_path):
    """A private copy of the toy corpus that a test may modify."""
    dest = tmp_path / "toy"
    shutil.copytree(toy_root, dest)
    return dest
