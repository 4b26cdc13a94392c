import numpy as np
import pytest

from hcpspectra.model import KickParams, RydbergState, energy_to_au


@pytest.fixture(scope="session")
def paper_state():
    return RydbergState(n0=50)


@pytest.fixture(scope="session")
def paper_kick():
    return KickParams(dp=0.05)


@pytest.fixture(scope="session")
def desk_state():
    """gamma = 5 image of the paper's case: cheap enough for quantum runs."""
    return RydbergState(n0=10)


@pytest.fixture(scope="session")
def desk_kick():
    return KickParams(dp=0.25)


@pytest.fixture(scope="session")
def shell_10mev(paper_state, paper_kick):
    from hcpspectra.search import energy_shell

    return energy_shell(paper_state, paper_kick, energy_to_au(10.0))


@pytest.fixture(scope="session")
def shell_40mev(paper_state, paper_kick):
    from hcpspectra.search import energy_shell

    return energy_shell(paper_state, paper_kick, energy_to_au(40.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
