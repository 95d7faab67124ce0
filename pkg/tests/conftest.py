import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion.

    Usage: ``criterion(n, "summary")`` at the start of the test; the line is
    marked PASS if the test finishes cleanly and FAIL otherwise.
    """
    state = {}

    def declare(number, summary):
        state["n"], state["summary"] = number, summary
        _CRITERIA[number] = f"FAIL criterion {number}: {summary}"

    yield declare
    if "n" in state:
        rep = getattr(request.node, "rep_call", None)
        ok = rep is not None and rep.passed
        line = f"{'PASS' if ok else 'FAIL'} criterion {state['n']}: {state['summary']}"
        _CRITERIA[state["n"]] = line
        print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
