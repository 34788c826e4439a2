import dataclasses

import numpy as np
import pytest

from tactex.config import ExperimentConfig, default_config
from tactex.neuron import SpikeArray, SpikeTrain
from tactex.traces import GridGeometry


def make_train(times, duration):
    return SpikeTrain(np.asarray(times, dtype=np.float64), duration)


def random_spike_array(rng, geometry=None, duration=4.0, max_rate=30.0, **meta):
    """Random spike array: per-taxel uniform spikes at a random rate."""
    geometry = geometry or GridGeometry()
    trains = []
    for _ in range(geometry.num_taxels):
        n = rng.poisson(rng.uniform(1.0, max_rate) * duration)
        times = np.sort(rng.uniform(0.0, duration, n))
        times = np.unique(times)
        trains.append(SpikeTrain(times, duration))
    return SpikeArray(trains=tuple(trains), geometry=geometry, **meta)


@pytest.fixture(scope="session")
def full_config() -> ExperimentConfig:
    return default_config()


@pytest.fixture(scope="session")
def tiny_config(full_config) -> ExperimentConfig:
    """Three textures, short slides, few trials: fast end-to-end runs."""
    corpus = dataclasses.replace(
        full_config.corpus,
        textures={
            k: full_config.corpus.textures[k]
            for k in ("tile_fine", "tile_coarse", "rug")
        },
        trials=6,
        slide_distance_mm=24.0,
    )
    return dataclasses.replace(
        full_config,
        corpus=corpus,
        folds=3,
        perturb_n_values=(2, 16),
        perturb_repeats=2,
        tor_fractions=(0.5, 1.0),
        gain_sweep_gains=(5.0, 8.0, 20.0),
    )
