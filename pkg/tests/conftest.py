import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_LINES] = []


@pytest.fixture
def detail(request):
    """Dict the acceptance tests fill with measured values for the summary line."""
    d = {}
    request.node.stash[_DETAIL] = d
    return d


_DETAIL = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    info = item.stash.get(_DETAIL, {})
    extra = "; ".join(f"{k}={v}" for k, v in info.items())
    verdict = "PASS" if rep.passed else "FAIL"
    line = f"[AC{number:>2}] {verdict}  {title}" + (f"  ({extra})" if extra else "")
    item.config.stash[_LINES].append((number, line))
    print("\n" + line)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
