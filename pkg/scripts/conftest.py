"""Shared pytest fixtures and the slow-test gate."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings as hypothesis_settings

# Make the package importable when running pytest from a checkout
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from fedac.models.config import (  # noqa: E402
    DataConfig,
    ExperimentConfig,
    ModelConfig,
    OutputConfig,
    PartitionConfig,
    RunConfig,
    SyntheticTaskConfig,
)
from fedac.nn.mlp import MlpSpec, ParamVector  # noqa: E402

hypothesis_settings.register_profile("fedac", max_examples=50, deadline=None)
hypothesis_settings.load_profile("fedac")

RUN_SLOW = os.getenv("FEDAC_RUN_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set FEDAC_RUN_SLOW=1 to run acceptance experiments")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def vector(values, split=None) -> ParamVector:
    """ParamVector from a list; the split defaults to everything but the last entry."""
    values = np.asarray(values, dtype=np.float64).ravel()
    return ParamVector(values, values.size - 1 if split is None else split)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec():
    return MlpSpec(layer_sizes=[5, 7, 3], activation="tanh")


@pytest.fixture
def tiny_experiment():
    """A seconds-scale synthetic experiment: 3 groups x 4 clients."""
    return ExperimentConfig(
        run=RunConfig(
            eta=0.05,
            mu=0.5,
            lam=0.1,
            K_init=2,
            D=5,
            rounds=3,
            sample_fraction=0.5,
            local_epochs=2,
            batch_size=16,
            map_refresh_period=2,
            cnt_period=2,
            seed=3,
        ),
        model=ModelConfig(hidden_sizes=[6]),
        data=DataConfig(
            synthetic=SyntheticTaskConfig(
                group_count=3, clients_per_group=4, input_dim=4, class_count=3, client_bias=0.2
            ),
            partition=PartitionConfig(size_min=20, size_max=40),
        ),
        output=OutputConfig(snapshot=True),
    )
