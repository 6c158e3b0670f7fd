import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for key in ("passed", "failed", "skipped"):
        reports.extend(terminalreporter.stats.get(key, []))
    acceptance = sorted(
        (r for r in reports if "test_acceptance.py" in r.nodeid and r.when == "call"),
        key=lambda r: r.nodeid,
    )
    # skips are reported at setup time, not call time
    acceptance.extend(
        sorted(
            (
                r
                for r in terminalreporter.stats.get("skipped", [])
                if "test_acceptance.py" in r.nodeid and r.when == "setup"
            ),
            key=lambda r: r.nodeid,
        )
    )
    if not acceptance:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for report in acceptance:
        if report.passed:
            status = "PASS"
        elif report.skipped:
            status = "SKIP"
        else:
            status = "FAIL"
        name = report.nodeid.split("::")[-1]
        terminalreporter.write_line(f"[{status}] {name}")
