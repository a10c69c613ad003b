"""Collects acceptance verdicts and prints them in the terminal summary."""

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
