import json

import numpy as np
import pytest

from config.constants import ENV_OUTPUT_DIR, ENV_THREADS
from core.channel_sim import ScenarioConfig, synthesize
from core.hybrid_nn import TrainConfig


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep overrides from the calling shell out of the tests"""
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    monkeypatch.delenv(ENV_THREADS, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noiseless_scenario():
    """K=2 users on M=4 antennas, no noise, no distortion"""
    return ScenarioConfig(num_users=2, num_antennas=4, train_symbols=64, data_symbols=256,
                          snr_db=float("inf"), seed=11)


@pytest.fixture
def noiseless_record(noiseless_scenario):
    return synthesize(noiseless_scenario)


@pytest.fixture
def small_scenario():
    """Six users with a short training phase and moderate noise"""
    return ScenarioConfig(num_users=6, num_antennas=4, train_symbols=64, data_symbols=128,
                          snr_db=20.0, seed=5)


@pytest.fixture
def fast_train():
    return TrainConfig(epochs=3, batch_size=32, lr=0.005, shuffle_seed=3)


@pytest.fixture
def small_config_file(tmp_path):
    """JSON experiment config small enough for CLI round trips"""
    data = {
        "scenario": {"num_users": 3, "num_antennas": 4, "train_symbols": 32, "data_symbols": 64,
                     "snr_db": 15, "seed": 99},
        "network": {"hidden_dims": [8, 8]},
        "train": {"epochs": 2, "batch_size": 16},
        "sweep": {"trials": 2, "detectors": ["LLS"]},
        "output": {"directory": str(tmp_path / "out")},
    }
    path = tmp_path / "small.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path
