"""Shared pytest hooks: a one-line verdict per acceptance criterion."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE, key=lambda n: n.rsplit("::", 1)[-1]):
        outcome = _ACCEPTANCE[nodeid]
        if outcome == "passed":
            verdict = "PASS"
        elif outcome == "skipped":
            verdict = "SKIP"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"{verdict}  {nodeid.rsplit('::', 1)[-1]}")
