_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if hasattr(report, "wasxfail"):
            verdict = "EXPECTED-UNKNOWN"
        elif report.passed:
            verdict = "PASS"
        elif report.skipped:
            verdict = "SKIP"
        else:
            verdict = "FAIL"
        _ACCEPTANCE[name] = (verdict, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        verdict, dur = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name:<48} {verdict:<16} {dur:7.2f} s")


