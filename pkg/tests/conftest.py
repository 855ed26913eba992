import pytest

from disctree._kernels import warm_up


@pytest.fixture(scope="session", autouse=True)
def jit_warm():
    """Compile (or load from disk cache) the jitted kernels once per session."""
    warm_up()
