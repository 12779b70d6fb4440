"""Shared test plumbing.

Acceptance tests record one line per criterion; the lines are printed in
the terminal summary so they survive pytest's output capture.
"""

ACCEPTANCE_RESULTS = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((label, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {label}: {detail}")
