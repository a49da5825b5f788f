import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict: ``criterion(k, ok, detail)``.

    A test that raises before recording is logged as a failure."""
    results = request.config.stash[_RESULTS]
    recorded = []

    def record(k, ok, detail):
        results[k] = (bool(ok), detail)
        recorded.append(k)

    yield record
    if not recorded:
        k = int(request.node.name.split("_")[1])
        results[k] = (False, "raised before reaching a verdict")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
