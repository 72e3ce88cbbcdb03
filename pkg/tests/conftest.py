import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_acceptance: dict = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+?)(\[|$)", report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    key = (int(m.group(1)), m.group(2))
    _acceptance[key] = _acceptance.get(key, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), ok in sorted(_acceptance.items()):
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {name.replace('_', ' ')}")
