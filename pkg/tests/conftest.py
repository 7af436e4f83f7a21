import sys

import pytest
from hypothesis import HealthCheck, settings

from oracles import sample_executions
from symreach.fixtures import build
from symreach.scenario import parse_scenario
from symreach.verifier import Verifier

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class FixtureRuns:
    """Full-tube runs of bundled fixtures, cached for the whole session."""

    def __init__(self):
        self._runs = {}
        self._samples = {}

    def scenario(self, name):
        sc = parse_scenario(build(name))
        sc.config.report_full_tubes = True
        return sc

    def get(self, name, use_cache=True):
        key = (name, use_cache)
        if key not in self._runs:
            v = Verifier(self.scenario(name), use_cache=use_cache)
            self._runs[key] = (v, v.run())
        return self._runs[key]

    def samples(self, name, count=500, seed=3):
        """Sampled executions per agent, in scenario order."""
        key = (name, count, seed)
        if key not in self._samples:
            sc = self.scenario(name)
            self._samples[key] = [sample_executions(sc, a, count=count, seed=seed) for a in sc.agents]
        return self._samples[key]


@pytest.fixture(scope="session")
def fixture_runs():
    return FixtureRuns()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
