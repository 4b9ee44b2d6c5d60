import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.failed or (rep.when == "call" and rep.passed) or rep.skipped:
        prev = _CRITERIA.get(num, (title, "PASS"))[1]
        status = "FAIL" if rep.failed or prev == "FAIL" else ("SKIP" if rep.skipped else "PASS")
        _CRITERIA[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}  {status}  {title}")
