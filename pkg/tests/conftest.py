import os

from hypothesis import HealthCheck, settings

from _support import RECORDS

settings.register_profile("default", max_examples=25, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    if RECORDS:
        terminalreporter.section("acceptance criteria")
        for line in RECORDS:
            terminalreporter.write_line(line)
