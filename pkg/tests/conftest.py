ACCEPTANCE: dict[int, object] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        o = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} {o.name:20s} {'PASS' if o.passed else 'FAIL'}  {o.summary}")
