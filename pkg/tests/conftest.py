import pytest
from hypothesis import HealthCheck, settings

from dynrepset.core.pseudorandom import FamilyCache
from dynrepset.workers.selftest import ContextPool


# contexts are session fixtures and the platform dirs are patched per test
settings.register_profile(
    "dynrepset",
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("dynrepset")


@pytest.fixture(scope="session")
def family_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("families")


@pytest.fixture(scope="session")
def pool(family_dir):
    """Contexts shared by the whole run; every (n, k) is built once."""
    return ContextPool(FamilyCache(family_dir))


@pytest.fixture(scope="session")
def ctx_6_3(pool):
    return pool.get(6, 3)


@pytest.fixture(scope="session")
def ctx_6_4(pool):
    return pool.get(6, 4)


@pytest.fixture(scope="session")
def ctx_8_4(pool):
    return pool.get(8, 4)


@pytest.fixture(autouse=True)
def isolated_platform_dirs(tmp_path, monkeypatch):
    """Settings and run logs go to a scratch directory instead of the user's."""
    from dynrepset.workers import util

    monkeypatch.setattr(util, "CONFIG_FILE", tmp_path / "config" / "settings.json")
    monkeypatch.setattr(util, "LOG_FILE", tmp_path / "logs" / "runs.jsonl")


PATH_GRAPH = "p kpath 3 2 3\ne 1 2 1\ne 2 3 2\n"
TRIANGLE = "# directed triangle\np kpath 3 3 3\ne 1 2 1\ne 2 3 1\ne 3 1 1\n"


@pytest.fixture
def path_graph_file(tmp_path):
    path = tmp_path / "path.txt"
    path.write_text(PATH_GRAPH)
    return path


@pytest.fixture
def triangle_file(tmp_path):
    path = tmp_path / "triangle.txt"
    path.write_text(TRIANGLE)
    return path
