"""Shared fixtures: small scenarios that keep the suite fast."""

import os
import sys

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from ici_whitening.config import ChannelParams, ScenarioConfig, TrainConfig  # noqa: E402


@pytest.fixture
def small_params():
    return ChannelParams(n_clusters=2, paths_per_cluster=3)


@pytest.fixture
def small_scenario():
    """20 positions, 2 RBs: train 0-4 and 15-19, test 5-14, interference at 8-11."""
    return ScenarioConfig(
        n_positions=20,
        rb_count=2,
        symbols_per_position=400,
        train_indices=tuple(range(0, 5)) + tuple(range(15, 20)),
        test_indices=tuple(range(5, 15)),
        interfered_indices=(8, 9, 10, 11),
    )


@pytest.fixture
def fast_train():
    return TrainConfig(epochs=5, hidden_dims=(8, 4), batch_size=16)
