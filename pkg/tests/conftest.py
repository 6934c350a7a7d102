import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    # keep default run directories out of the working tree
    monkeypatch.setenv("SRSM_OPT_DIR", str(tmp_path / "runs"))
