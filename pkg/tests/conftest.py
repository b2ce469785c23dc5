from __future__ import annotations
from pathlib import Path

import numpy as np
import pytest

from sbfl_leo.config import load_scenario
from sbfl_leo.dataio.synthetic import make_synthetic
from sbfl_leo.fl.data import LabeledDataset, TrainConfig
from sbfl_leo.fl.model import ModelLayout

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS


@pytest.fixture
def blobs() -> tuple[LabeledDataset, LabeledDataset]:
    """Three well separated 4-d classes."""
    return make_synthetic(classes=3, dim=4, per_class=60, spread=0.5, seed=0)


@pytest.fixture
def layout() -> ModelLayout:
    return ModelLayout(feature_dim=4, class_count=3)


@pytest.fixture
def train_cfg() -> TrainConfig:
    return TrainConfig(epochs=5, batch_size=16, learning_rate=0.1, seed=7)


@pytest.fixture
def toy_cfg():
    """Seconds-long synthetic scenario: 20 satellites, 2 clusters, label flip in rounds 2-3."""
    return load_scenario(CONFIGS / "toy.yaml")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
