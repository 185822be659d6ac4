"""Print one PASS/FAIL line per acceptance criterion at the end of the run."""
import re

_results: dict[int, tuple[str, str, str]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    number = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        reason = ""
        if report.failed:
            text = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else str(report.longrepr)
            reason = text.splitlines()[0][:160]
        _results[number] = ("PASS" if report.passed else "FAIL", m.group(2).replace("_", " "), reason)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        verdict, name, reason = _results[number]
        line = f"criterion {number:2d}: {verdict}  {name}"
        if reason:
            line += f"  ({reason})"
        terminalreporter.write_line(line)
