import json
from pathlib import Path

import pytest

from sirpursuit.dictionary import GridSpec, build_dictionary

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def sir_reference():
    return json.loads((FIXTURES / "sir_reference.json").read_text())


@pytest.fixture(scope="session")
def feasibility_fixture():
    return json.loads((FIXTURES / "feasibility.json").read_text())


@pytest.fixture(scope="session")
def default_spec():
    return GridSpec()


@pytest.fixture(scope="session")
def dict_1e5(default_spec):
    """Default-grid dictionary at the smallest population size."""
    return build_dictionary(default_spec, populations=[1e5])[1e5]


@pytest.fixture(scope="session")
def all_dicts(default_spec):
    return build_dictionary(default_spec)
