import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_config():
    from grouptransnet.config import Config
    return Config.for_profile("toy")


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    from grouptransnet.data import gen_synthetic
    root = tmp_path_factory.mktemp("synth")
    gen_synthetic(root, 16, 64, seed=3)
    return root
