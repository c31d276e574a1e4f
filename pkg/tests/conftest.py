import pytest

from pooldesign import DesignParams, certificate, construct_design

_ACCEPTANCE: list[tuple[tuple, str]] = []


@pytest.fixture(scope="session")
def design_q31():
    return construct_design(DesignParams(q=31, s=7))


@pytest.fixture(scope="session")
def cert_q31(design_q31):
    return certificate(design_q31)


@pytest.fixture(scope="session")
def design_q5():
    return construct_design(DesignParams(q=5, s=2))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        _ACCEPTANCE.append((marker.args, report.outcome))
    elif marker and report.when == "setup" and report.outcome == "skipped":
        _ACCEPTANCE.append((marker.args, "skipped"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for args, outcome in sorted(_ACCEPTANCE, key=lambda entry: entry[0]):
        number, description = args
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper()
        )
        terminalreporter.write_line(f"criterion {number}: {label} - {description}")
