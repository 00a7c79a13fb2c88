import pytest

from iterforge.assets import AssetStore


@pytest.fixture
def store(tmp_path):
    s = AssetStore(tmp_path / "store")
    yield s
    s.close()
