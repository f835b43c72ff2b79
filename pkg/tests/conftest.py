ACCEPTANCE_LINES: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
