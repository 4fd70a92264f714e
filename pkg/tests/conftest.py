"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if call.when == "setup" and call.excinfo is not None:
        _RESULTS[number] = (title, "FAIL", "setup error")
    elif call.when == "call":
        status = "PASS" if call.excinfo is None else "FAIL"
        if call.excinfo is not None and not detail:
            detail = call.excinfo.exconly().splitlines()[0][:160]
        _RESULTS[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, detail = _RESULTS[number]
        line = f"criterion {number:>2} {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
