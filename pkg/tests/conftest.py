import copy
import json

import pytest

from syncreg.io import build_scenario, resolve_config


def load_bundled(name):
    with open(resolve_config(name)) as fh:
        return json.load(fh)


def scenario_data(name="paper_sec5.json", **overrides):
    """Bundled scenario document with top-level sections replaced or patched.

    A dict override is merged into the section; anything else replaces it.
    """
    data = copy.deepcopy(load_bundled(name))
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return data


def make_scenario(name="paper_sec5.json", seed=None, **overrides):
    return build_scenario(scenario_data(name, **overrides), seed=seed)


ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    def report(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
