import time

import pytest

_results: dict[int, list] = {}
_start = time.perf_counter()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    num, text = mark.args
    entry = _results.setdefault(num, [text, True])
    entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        text, ok = _results[num]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {text}")
    elapsed = time.perf_counter() - _start
    tr.write_line(f"[{'PASS' if elapsed < 120 else 'FAIL'}] suite runtime {elapsed:.1f} s (limit 120 s)")
