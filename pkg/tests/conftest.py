"""Shared pytest plumbing: the acceptance-criteria summary block.

Acceptance tests record one verdict per criterion via
:func:`record_criterion`; the terminal summary prints them as a compact
pass/fail table after the usual pytest output.
"""

_CRITERIA: dict = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    _CRITERIA[number] = (passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, title, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number} [{status}] {title}"
        if detail:
            line += f" — {detail}"
        terminalreporter.write_line(line)
