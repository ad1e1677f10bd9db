import pytest

from wire_driver import FIXTURES


@pytest.fixture
def fixture_path():
    def lookup(name):
        path = FIXTURES / name
        assert path.exists(), f"missing test fixture {name}"
        return path

    return lookup
