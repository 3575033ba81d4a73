"""Shared fixtures; collects one PASS/FAIL line per acceptance criterion."""
import pytest

_LINES = {}


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.notes = []

    def note(self, text):
        self.notes.append(text)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(*marker.args)
    yield c
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    detail = "; ".join(c.notes)
    line = f"{status} criterion {c.number:>2}: {c.title}" + (f" -- {detail}" if detail else "")
    _LINES[c.number] = line
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
