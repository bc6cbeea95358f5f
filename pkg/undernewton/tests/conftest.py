"""Shared fixtures; keeps the global config out of the real home directory."""
import os
import tempfile

import numpy as np
import pytest

os.environ.setdefault("UNDERNEWTON_HOME", tempfile.mkdtemp(prefix="undernewton-test-"))


@pytest.fixture
def rng():
    """Seeded generator for reproducible random data."""
    return np.random.Generator(np.random.PCG64(20240601))
