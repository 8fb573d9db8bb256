import pytest

from helpers import MANIFEST_48


@pytest.fixture(scope="session")
def manifest48_path():
    return MANIFEST_48


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the sampler kernels once so timed tests measure only sampling."""
    from helpers import make_corpus
    from topicmine import GibbsLda

    GibbsLda(n_topics=2, sweeps=2, burn_in=0, seed=0).fit(
        make_corpus([[0, 1], [1, 0]]))
