"""Per-criterion PASS/FAIL summary for tests tagged ``@pytest.mark.criterion(k, title)``."""

_CRITERIA = {}
_OUTCOME = {}
_NODES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion tag")


def pytest_collection_modifyitems(session, config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is None:
            continue
        number, title = mark.args
        _CRITERIA[number] = title
        _NODES[item.nodeid] = number
        _OUTCOME.setdefault(number, "PASS")


def pytest_runtest_logreport(report):
    number = _NODES.get(report.nodeid)
    if number is None:
        return
    if report.failed:
        _OUTCOME[number] = "FAIL"
    elif report.skipped and _OUTCOME[number] == "PASS":
        _OUTCOME[number] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:>2} {_OUTCOME[number]}: {_CRITERIA[number]}")
