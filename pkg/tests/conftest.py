ACCEPTANCE_LINES: list[str] = []


def record_acceptance(num: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(
        f"ACCEPTANCE {num:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
