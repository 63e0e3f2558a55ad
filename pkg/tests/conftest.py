import time
from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Time a block against its limit and record a pass/fail line for the summary."""
    results = request.config.stash[_RESULTS]

    @contextmanager
    def timed(title: str, limit: float):
        start = time.perf_counter()
        results[title] = ("FAIL", None, limit)
        yield
        elapsed = time.perf_counter() - start
        results[title] = ("PASS" if elapsed < limit else "FAIL", elapsed, limit)
        assert elapsed < limit, f"{title}: took {elapsed:.2f} s, limit {limit} s"

    return timed


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for title, (status, elapsed, limit) in results.items():
        took = "did not finish" if elapsed is None else f"{elapsed:.2f} s"
        terminalreporter.line(f"{status}  {title}  ({took}, limit {limit:g} s)")
