import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            num, title = mark.args
            _CRITERIA.setdefault(num, {"title": title, "tests": {}})
            _CRITERIA[num]["tests"][item.nodeid] = None


def pytest_runtest_logreport(report):
    for entry in _CRITERIA.values():
        if report.nodeid in entry["tests"]:
            if report.when == "call" or report.outcome != "passed":
                prev = entry["tests"][report.nodeid]
                if prev is None or prev == "passed":
                    entry["tests"][report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outcomes = list(entry["tests"].values())
        if any(o is None for o in outcomes):
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        failed = [nid.split("::")[-1] for nid, o in entry["tests"].items() if o not in (None, "passed")]
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {num} {status}: {entry['title']}{detail}")


@pytest.fixture(scope="session")
def scenarios():
    from crowdsweep.model import bundled_scenario

    return {name: bundled_scenario(name) for name in ("ex1", "ex2", "ex3")}


@pytest.fixture(scope="session")
def optima(scenarios):
    from crowdsweep.two_body import optimize

    return {name: optimize(sc) for name, sc in scenarios.items()}
