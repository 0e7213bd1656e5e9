"""Prints one pass/fail line per acceptance criterion at the end of the run."""

import re

CRITERIA = {
    1: "longitudinal conflict",
    2: "lateral conflict",
    3: "count formulas",
    4: "solver oracle equivalence",
    5: "S-pattern truth tables",
    6: "GS convergence",
    7: "potential descent",
    8: "best-response oracle",
}

_NAME = re.compile(r"test_acceptance\.py::test_criterion_(\d)_")
_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or report.failed:
        _outcomes.setdefault(int(m.group(1)), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, label in CRITERIA.items():
        results = _outcomes.get(n)
        verdict = "NOT RUN" if results is None else ("PASS" if all(results) else "FAIL")
        terminalreporter.write_line(f"criterion {n} ({label}): {verdict}")
