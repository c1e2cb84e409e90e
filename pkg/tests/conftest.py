import pytest

from kextrust.topology import bundled_topology


@pytest.fixture(scope="session")
def fig2():
    """The ten-sensor example network with derived wireless sets."""
    return bundled_topology("fig2")
