"""Spike encoding of analog channels with the Izhikevich regular-spiking model.

Each preprocessed channel value is scaled by a gain and injected as input
current into a two-variable quadratic neuron model with after-spike reset,
mimicking a slow-adapting mechanoreceptor. Integration is fixed-step at the
channel sample rate (membrane potential advanced in two half-steps per
sample, adaptation variable once), which is the standard published practice
for this model. A spike is recorded whenever the membrane potential reaches
``v_peak``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .traces import GridGeometry, SensorTrace

__all__ = [
    "NeuronParams",
    "SpikeTrain",
    "SpikeArray",
    "IsiHistogram",
    "encode",
    "encode_array",
    "bin_isis",
    "isi_histogram_sweep",
]


@dataclass(frozen=True)
class NeuronParams:
    """Regular-spiking neuron constants plus the input-current gain."""

    a: float = 0.02
    b: float = 0.2
    c: float = -65.0
    d: float = 8.0
    v_peak: float = 30.0
    gain: float = 8.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be positive")
        if self.v_peak <= self.c:
            raise ValueError("v_peak must exceed the reset potential c")
        if self.gain <= 0:
            raise ValueError("gain must be positive")


@dataclass(frozen=True)
class SpikeTrain:
    """Ordered spike times (seconds) over a fixed observation duration."""

    spike_times_s: np.ndarray
    duration_s: float

    def __post_init__(self):
        times = np.asarray(self.spike_times_s, dtype=np.float64)
        object.__setattr__(self, "spike_times_s", times)
        if self.duration_s < 0:
            raise ValueError("duration_s must be non-negative")
        if times.size:
            if not np.isfinite(times).all():
                raise ValueError("spike times must be finite")
            if times[0] < 0 or times[-1] >= self.duration_s:
                raise ValueError("spike times must lie in [0, duration)")
            if np.any(np.diff(times) <= 0):
                raise ValueError("spike times must be strictly increasing")

    @property
    def num_spikes(self) -> int:
        return int(self.spike_times_s.size)

    def isis(self) -> np.ndarray:
        return np.diff(self.spike_times_s)


@dataclass(frozen=True)
class SpikeArray:
    """One spike train per taxel, grid row-major, with carried metadata."""

    trains: tuple[SpikeTrain, ...]
    geometry: GridGeometry
    label: str = ""
    velocity_mm_s: float = 0.0
    trial_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trains", tuple(self.trains))
        if len(self.trains) != self.geometry.num_taxels:
            raise ValueError(
                f"expected {self.geometry.num_taxels} trains, got {len(self.trains)}"
            )
        durations = {t.duration_s for t in self.trains}
        if len(durations) > 1:
            raise ValueError("all trains must share the same duration")

    @property
    def duration_s(self) -> float:
        return self.trains[0].duration_s

    def train_at(self, row: int, col: int) -> SpikeTrain:
        return self.trains[row * self.geometry.cols + col]


def _raster_to_trains(raster, sample_rate_hz, duration_s):
    trains = []
    for row in raster:
        steps = np.flatnonzero(row)
        trains.append(
            SpikeTrain(steps.astype(np.float64) / sample_rate_hz, duration_s)
        )
    return trains


def encode(
    channel: Sequence[float], sample_rate_hz: float, params: NeuronParams
) -> SpikeTrain:
    """Convert one analog channel into a spike train.

    The input current at each step is gain * channel value (zero-order hold).
    Spike times are the step times of threshold crossings, so resolution
    equals the sampling interval. Deterministic.
    """
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 1 or channel.size == 0:
        raise ValueError("channel must be a non-empty 1-D array")
    if not np.isfinite(channel).all():
        raise ValueError("channel contains non-finite samples")
    if sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be positive")
    raster, bad_ch, bad_step = _kernels.izhikevich_raster(
        channel[np.newaxis, :],
        1000.0 / sample_rate_hz,
        params.a,
        params.b,
        params.c,
        params.d,
        params.v_peak,
        params.gain,
    )
    if bad_step >= 0:
        raise ValueError(
            f"neuron state became non-finite at t={bad_step / sample_rate_hz}s"
        )
    duration = channel.size / sample_rate_hz
    return _raster_to_trains(raster, sample_rate_hz, duration)[0]


def encode_array(trace: SensorTrace, params: NeuronParams) -> SpikeArray:
    """Encode every channel of a trace independently; metadata carries through."""
    raster, bad_ch, bad_step = _kernels.izhikevich_raster(
        trace.channels,
        1000.0 / trace.sample_rate_hz,
        params.a,
        params.b,
        params.c,
        params.d,
        params.v_peak,
        params.gain,
    )
    if bad_step >= 0:
        raise ValueError(
            f"neuron state became non-finite on channel {bad_ch} "
            f"at t={bad_step / trace.sample_rate_hz}s"
        )
    trains = _raster_to_trains(raster, trace.sample_rate_hz, trace.duration_s)
    return SpikeArray(
        trains=tuple(trains),
        geometry=trace.geometry,
        label=trace.label,
        velocity_mm_s=trace.velocity_mm_s,
        trial_id=trace.trial_id,
    )


def bin_isis(isis: np.ndarray, bin_width_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Histogram intervals into half-open bins [k*w, (k+1)*w) from zero.

    Edges extend one bin past the largest interval so the maximum lands in
    a regular half-open bin.
    """
    if bin_width_s <= 0:
        raise ValueError("bin_width_s must be positive")
    isis = np.asarray(isis, dtype=np.float64)
    if isis.size == 0:
        return np.empty(0, dtype=np.int64), np.array([0.0])
    edges = np.arange(0.0, isis.max() + 2 * bin_width_s, bin_width_s)
    counts, edges = np.histogram(isis, bins=edges)
    return counts.astype(np.int64), edges


@dataclass(frozen=True)
class IsiHistogram:
    """Pooled inter-spike-interval histogram for one (gain, stimulus) pair.

    ``counts`` may be empty when the pool produced fewer than one interval
    (sparse responses at low gain); that is flagged, not an error.
    """

    gain: float
    label: str
    bin_edges: np.ndarray
    counts: np.ndarray
    mean_isi_s: float = float("nan")

    @property
    def empty(self) -> bool:
        return self.counts.size == 0 or int(self.counts.sum()) == 0

    @property
    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / total


def isi_histogram_sweep(
    traces: Iterable[SensorTrace],
    gains: Sequence[float],
    params: NeuronParams,
    bin_width_s: float = 0.01,
) -> list[IsiHistogram]:
    """Pool ISIs over all taxels and trials per stimulus label, per gain.

    Used to pick the encoding gain: low gains give sparse responses (long or
    missing intervals), high gains compress all stimuli toward short
    intervals. Returns one histogram per (gain, label) pair.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("traces must be non-empty")
    if not gains:
        raise ValueError("gains must be non-empty")
    if bin_width_s <= 0:
        raise ValueError("bin_width_s must be positive")
    histograms = []
    for gain in gains:
        pooled: dict[str, list[np.ndarray]] = {}
        for trace in traces:
            arr = encode_array(trace, replace(params, gain=gain))
            bucket = pooled.setdefault(trace.label, [])
            for train in arr.trains:
                if train.num_spikes >= 2:
                    bucket.append(train.isis())
        for label in sorted(pooled):
            isis = (
                np.concatenate(pooled[label])
                if pooled[label]
                else np.empty(0, dtype=np.float64)
            )
            counts, edges = bin_isis(isis, bin_width_s)
            histograms.append(
                IsiHistogram(
                    gain=gain,
                    label=label,
                    bin_edges=edges,
                    counts=counts,
                    mean_isi_s=float(isis.mean()) if isis.size else float("nan"),
                )
            )
    return histograms
