import os
import sys

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config.hardware import DramPimSpec, HardwareConfig, InterconnectSpec  # noqa: E402

np.seterr(all="ignore")

hypothesis.settings.register_profile("ci", max_examples=30, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def hw():
    return HardwareConfig()


@pytest.fixture
def small_hw():
    """Zwei Kanäle, ein Gerät"""
    return HardwareConfig(dram=DramPimSpec(channels_per_device=2), interconnect=InterconnectSpec(devices=1))


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv('COMPAIR_OUT_DIR', str(tmp_path))
    return tmp_path
