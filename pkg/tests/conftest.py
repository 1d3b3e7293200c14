import sys
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, text = marker
    _criteria.setdefault(number, (text, []))[1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, outcomes = _criteria[number]
        ran = [o for o in outcomes if o != "skipped"]
        verdict = "PASS" if ran and all(o == "passed" for o in ran) else "FAIL"
        skipped = len(outcomes) - len(ran)
        extra = f", {skipped} skipped" if skipped else ""
        terminalreporter.write_line(f"criterion {number}: {verdict}  {text}  ({len(ran)} checks{extra})")


@pytest.fixture
def data_dir():
    return DATA
