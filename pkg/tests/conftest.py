import sys


def pytest_terminal_summary(terminalreporter, exitstatus):
    """Echo one line per acceptance criterion at the end of the run."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "CRITERION_RESULTS", None) if module else None
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for status, name in results:
        terminalreporter.write_line(f"ACCEPTANCE {status}: {name}")
