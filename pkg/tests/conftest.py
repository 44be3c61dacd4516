"""Collects acceptance outcomes and prints one verdict line per criterion."""

from collections import OrderedDict

import pytest

_verdicts = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        n, title = marker.args
        entry = _verdicts.setdefault(n, {"title": title, "ok": True, "details": []})
        entry["ok"] &= report.passed
        entry["details"].extend(v for k, v in item.user_properties if k == "measured")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        v = _verdicts[n]
        line = f"{'PASS' if v['ok'] else 'FAIL'} criterion {n:>2}: {v['title']}"
        if v["details"]:
            line += " | " + "; ".join(v["details"])
        terminalreporter.write_line(line)
