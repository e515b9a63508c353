_ACCEPTANCE_LINES = []


def record_criterion(label, passed, detail):
    line = f"[{label}] {'PASS' if passed else 'FAIL'} - {detail}"
    _ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
