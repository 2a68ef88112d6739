import pytest

from cbcl import Agent
from support import make_agent

_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, title = marker.args
    entry = _criteria.setdefault(cid, {"title": title, "passed": True, "seen": False, "detail": ""})
    if report.when == "call" or report.failed:
        entry["seen"] = True
        if report.failed:
            entry["passed"] = False
            crash = getattr(report.longrepr, "reprcrash", None)
            entry["detail"] = crash.message.splitlines()[0] if crash else str(report.longrepr)[:200]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[2:])):
        entry = _criteria[cid]
        if not entry["seen"]:
            status = "SKIP"
        else:
            status = "PASS" if entry["passed"] else "FAIL"
        line = f"{cid:<5} {status}  {entry['title']}"
        if status == "FAIL" and entry["detail"]:
            line += f"\n      {entry['detail'][:240]}"
        terminalreporter.write_line(line)


@pytest.fixture
def logistics_agent() -> Agent:
    return make_agent("logistics")
