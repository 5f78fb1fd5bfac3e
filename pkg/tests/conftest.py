import pytest

CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    """Register the acceptance criterion a test checks; its outcome is reported at the end."""
    keys = []

    def record(key, description):
        keys.append((key, description))

    yield record
    rep = getattr(request.node, "rep_call", None)
    for key, description in keys:
        CRITERIA[key] = (rep is not None and rep.passed, description)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: int(k[1:])):
        ok, desc = CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {key}: {desc}")
