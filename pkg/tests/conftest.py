import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("walklab", max_examples=60, deadline=None)
settings.load_profile("walklab")

# acceptance verdicts collected by test_acceptance, echoed after the run
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
