import pytest

_CRITERIA = {}
_SEEN = set()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion for the summary lines."""
    key = request.node.get_closest_marker("criterion").args[0]
    _SEEN.add(key)

    def report(ok, detail=""):
        prev = _CRITERIA.get(key, (True, ""))
        _CRITERIA[key] = (prev[0] and bool(ok), "; ".join(x for x in (prev[1], detail) if x))
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if not _SEEN:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_SEEN):
        ok, detail = _CRITERIA.get(key, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
