"""Spatio-temporal response volumes and their ablation transforms.

A response volume is a [rows x cols x time-bins] grid whose voxel intensity
is the mean spiking rate of one taxel over one time bin (default depth
0.2 s). Gray-level quantization of the volume feeds co-occurrence analysis;
the quantizer range is fitted on training data only and frozen, preventing
train/test leakage. The two ablation transforms — random spatial
reassignment of taxels and collapse of the time axis — remove exactly one of
the two kinds of structure the volume carries.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .neuron import SpikeArray
from .traces import GridGeometry

__all__ = [
    "ResponseVolume",
    "QuantizedVolume",
    "Quantizer",
    "DEFAULT_BIN_S",
    "DEFAULT_NUM_LEVELS",
    "build_volume",
    "fit_quantizer",
    "quantize",
    "perturb_spatial",
    "collapse_time",
    "truncate_time",
    "write_volume_csv",
]

DEFAULT_BIN_S = 0.2
DEFAULT_NUM_LEVELS = 8

# guard against float-division shortfall when a duration is an exact
# multiple of the bin width (e.g. 18.0 / 0.2)
_FLOOR_GUARD = 1e-9


def _guarded_floor(x: float) -> int:
    return int(np.floor(x + _FLOOR_GUARD))


@dataclass(frozen=True)
class ResponseVolume:
    """Per-voxel mean spiking rate (Hz) on the taxel grid over time bins."""

    values: np.ndarray
    bin_s: float
    geometry: GridGeometry
    label: str = ""
    velocity_mm_s: float = 0.0
    trial_id: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 3:
            raise ValueError("values must be [rows x cols x t_bins]")
        if vals.shape[0] != self.geometry.rows or vals.shape[1] != self.geometry.cols:
            raise ValueError("values shape does not match grid geometry")
        if vals.shape[2] < 1:
            raise ValueError("volume needs at least one time bin")
        if self.bin_s <= 0:
            raise ValueError("bin_s must be positive")
        if (vals < 0).any():
            raise ValueError("voxel intensities must be non-negative")

    @property
    def t_bins(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class Quantizer:
    """Frozen linear gray-level quantizer range fitted on training data."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("quantizer needs hi > lo")


@dataclass(frozen=True)
class QuantizedVolume:
    """Integer gray-level volume in [0, num_levels-1] plus its quantizer."""

    levels: np.ndarray
    num_levels: int
    quantizer: Quantizer
    geometry: GridGeometry
    bin_s: float = DEFAULT_BIN_S
    label: str = ""
    velocity_mm_s: float = 0.0
    trial_id: int = 0

    def __post_init__(self):
        lv = np.asarray(self.levels)
        object.__setattr__(self, "levels", lv)
        if lv.ndim != 3:
            raise ValueError("levels must be [rows x cols x t_bins]")
        if self.num_levels < 2:
            raise ValueError("num_levels must be at least 2")
        if lv.size and (lv.min() < 0 or lv.max() >= self.num_levels):
            raise ValueError("levels out of range")

    @property
    def t_bins(self) -> int:
        return self.levels.shape[2]


def build_volume(spikes: SpikeArray, bin_s: float = DEFAULT_BIN_S) -> ResponseVolume:
    """Bin each taxel's spikes into tiling time windows of depth ``bin_s``.

    Voxel (r, c, k) is the spike count of taxel (r, c) in
    [k*bin_s, (k+1)*bin_s) divided by bin_s. The trailing partial bin is
    discarded rather than zero-padded.
    """
    if bin_s <= 0:
        raise ValueError("bin_s must be positive")
    t_bins = _guarded_floor(spikes.duration_s / bin_s)
    if t_bins < 1:
        raise ValueError("duration shorter than one time bin")
    g = spikes.geometry
    values = np.zeros((g.rows, g.cols, t_bins), dtype=np.float64)
    for idx, train in enumerate(spikes.trains):
        bins = np.floor(train.spike_times_s / bin_s).astype(np.int64)
        counts = np.bincount(bins[bins < t_bins], minlength=t_bins)
        values[idx // g.cols, idx % g.cols, :] = counts / bin_s
    return ResponseVolume(
        values=values,
        bin_s=bin_s,
        geometry=g,
        label=spikes.label,
        velocity_mm_s=spikes.velocity_mm_s,
        trial_id=spikes.trial_id,
    )


def fit_quantizer(
    training_volumes: Iterable[ResponseVolume], num_levels: int = DEFAULT_NUM_LEVELS
) -> Quantizer:
    """Fit the frozen linear quantizer range [0, training max] for N levels.

    Must be fitted on training volumes only; test-time values above the
    training maximum are clamped to the top level.
    """
    volumes = list(training_volumes)
    if num_levels < 2:
        raise ValueError("num_levels must be at least 2")
    if not volumes:
        raise ValueError("training set must be non-empty")
    hi = max(float(v.values.max()) for v in volumes)
    if hi <= 0:
        raise ValueError("cannot fit quantizer: all training voxels are zero")
    return Quantizer(lo=0.0, hi=hi)


def quantize(
    vol: ResponseVolume, q: Quantizer, num_levels: int = DEFAULT_NUM_LEVELS
) -> QuantizedVolume:
    """Map voxel intensities to integer gray levels; monotone, clamped."""
    if num_levels < 2:
        raise ValueError("num_levels must be at least 2")
    width = (q.hi - q.lo) / num_levels
    levels = np.floor((vol.values - q.lo) / width).astype(np.int32)
    np.clip(levels, 0, num_levels - 1, out=levels)
    return QuantizedVolume(
        levels=levels,
        num_levels=num_levels,
        quantizer=q,
        geometry=vol.geometry,
        bin_s=vol.bin_s,
        label=vol.label,
        velocity_mm_s=vol.velocity_mm_s,
        trial_id=vol.trial_id,
    )


def _sample_derangement(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniformly sampled permutation of range(n) with no fixed points."""
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            return perm


def perturb_spatial(spikes: SpikeArray, n: int, seed) -> SpikeArray:
    """Randomly reassign the grid positions of n taxels.

    Selects n distinct taxels uniformly at random and moves them by a
    uniformly sampled derangement of the selected positions, so every
    selected taxel is guaranteed displaced. Per-taxel spike timing is left
    untouched; only positions change.
    """
    num_taxels = spikes.geometry.num_taxels
    if n < 2:
        raise ValueError("n must be at least 2 (no single-taxel displacement exists)")
    if n > num_taxels:
        raise ValueError(f"n must not exceed the taxel count {num_taxels}")
    rng = np.random.default_rng(seed)
    selected = rng.choice(num_taxels, size=n, replace=False)
    perm = _sample_derangement(rng, n)
    trains = list(spikes.trains)
    for i in range(n):
        trains[int(selected[perm[i]])] = spikes.trains[int(selected[i])]
    return replace(spikes, trains=tuple(trains))


def collapse_time(vol: ResponseVolume) -> ResponseVolume:
    """Average the time axis away, leaving a single [rows x cols x 1] slab.

    The collapsed voxel equals the taxel's mean rate over the whole binned
    window, so the slab's bin depth becomes t_bins * bin_s.
    """
    collapsed = vol.values.mean(axis=2, keepdims=True)
    return replace(vol, values=collapsed, bin_s=vol.bin_s * vol.t_bins)


def truncate_time(vol: ResponseVolume, fraction: float) -> ResponseVolume:
    """Keep only the first floor(fraction * t_bins) time slabs."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    keep = _guarded_floor(fraction * vol.t_bins)
    if keep < 1:
        raise ValueError("fraction keeps zero time slabs")
    return replace(vol, values=vol.values[:, :, :keep].copy())


def write_volume_csv(vol: ResponseVolume, quantized: QuantizedVolume, path) -> None:
    """Debug dump: one `r,c,k,msr,level` row per voxel."""
    if quantized.levels.shape != vol.values.shape:
        raise ValueError("volume and quantized volume shapes differ")
    with open(path, "w") as fh:
        fh.write("r,c,k,msr,level\n")
        for r in range(vol.values.shape[0]):
            for c in range(vol.values.shape[1]):
                for k in range(vol.values.shape[2]):
                    fh.write(
                        f"{r},{c},{k},{float(vol.values[r, c, k])!r},"
                        f"{int(quantized.levels[r, c, k])}\n"
                    )
