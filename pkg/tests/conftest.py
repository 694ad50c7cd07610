import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda l: int(l.split()[0][1:])):
            terminalreporter.write_line(line)
