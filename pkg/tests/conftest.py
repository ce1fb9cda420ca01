"""Shared test plumbing: a one-line-per-criterion acceptance summary."""

import pytest

_LINES = {}


class AcceptanceRecorder:
    def __init__(self, key, title):
        self.key = key
        self.title = title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def check(self, ok, text):
        self.details.append(("" if ok else "FAILED: ") + text)
        return ok

    def finish(self, ok):
        _LINES[self.key] = (self.title, ok, "; ".join(self.details))
        assert ok, f"{self.title}: " + "; ".join(self.details)


@pytest.fixture
def criterion(request):
    def make(key, title):
        return AcceptanceRecorder(key, title)

    return make


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_LINES, key=lambda k: int(k[1:])):
        title, ok, details = _LINES[key]
        terminalreporter.write_line(f"{key:>3} {'PASS' if ok else 'FAIL'}  {title}  [{details}]")
