"""Reference executors and their package manifests."""
from pathlib import Path

PACKAGES_DIR = Path(__file__).parent / "packages"


def package_path(kind: str) -> Path:
    """Directory of the built-in executor package for `kind` (train/mine/infer)."""
    return PACKAGES_DIR / kind
