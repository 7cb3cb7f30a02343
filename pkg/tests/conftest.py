import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" in report.nodeid and report.when == "call":
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    from test_acceptance import TITLES
    terminalreporter.section("acceptance criteria")
    for name, title in TITLES.items():
        status = _ACCEPTANCE.get(name)
        if status:
            terminalreporter.write_line(f"{status}  {name.replace('test_', '')}: {title}")
