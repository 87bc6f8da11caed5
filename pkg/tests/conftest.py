import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_boundary_bundle  # noqa: E402


@pytest.fixture(scope="session")
def boundary_bundle(tmp_path_factory):
    """Session-scoped synthetic bundle whose metrics all hit their best values."""
    root = tmp_path_factory.mktemp("bundle")
    return make_boundary_bundle(root)
