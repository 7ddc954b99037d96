import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("FIRECAST_CLI") or shutil.which("firecast")
    if not path:
        pytest.skip("firecast executable not available")
    return path
