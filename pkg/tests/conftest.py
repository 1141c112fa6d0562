import pytest

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(item.user_properties).get("detail", "")
        _criteria.append((marker.args[0], marker.args[1], report.passed, report.duration, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, duration, detail in sorted(_criteria):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number}: {status}  {title}  ({duration:.2f}s)"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
