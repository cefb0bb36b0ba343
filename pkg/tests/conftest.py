from collections import defaultdict

_NUMBERS = {}
_LABELS = {}
_CHECKS = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion a test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, label = marker.args
            _NUMBERS[item.nodeid] = number
            _LABELS[number] = label


def pytest_runtest_logreport(report):
    number = _NUMBERS.get(report.nodeid)
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(report.user_properties).get("detail", "")
        _CHECKS[number].append((report.nodeid.split("::")[-1], report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, then its checks."""
    if not _CHECKS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CHECKS):
        checks = _CHECKS[number]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {number} {status}  {_LABELS[number]}")
        for name, ok, detail in checks:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}" + (f"  [{detail}]" if detail else ""))
