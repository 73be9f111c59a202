import pytest

from spin1bell.analyzer import DetectionModel
from spin1bell.experiment import table_from_means

# Printed table for the setting alpha = -16, beta' = 14: raw 60 s averages, Mod., Prob. (%)
PRINTED_TABLE = {
    (1, 1): (2.20, 11.71, 2.25),
    (1, -1): (18.04, 96.05, 18.46),
    (-1, 1): (17.37, 92.48, 17.77),
    (-1, -1): (1.78, 9.48, 1.82),
    (1, 0): (21.92, 50.47, 9.70),
    (0, 1): (33.67, 77.86, 14.96),
    (-1, 0): (21.43, 49.34, 9.48),
    (0, -1): (28.74, 66.46, 12.77),
    (0, 0): (66.50, 66.50, 12.78),
}
PRINTED_TOTAL = 520.35


@pytest.fixture
def printed_table():
    return table_from_means("ab'", -16.0, 14.0, {k: v[0] for k, v in PRINTED_TABLE.items()})


@pytest.fixture
def lab_det():
    return DetectionModel(0.431, 0.434)


_acceptance_results = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    if report.when == "call" or report.failed:
        detail = dict(item.user_properties).get("detail", "")
        _acceptance_results.append((marker.args[0], marker.args[1], report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, detail in sorted(_acceptance_results, key=lambda r: r[0]):
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {number}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
