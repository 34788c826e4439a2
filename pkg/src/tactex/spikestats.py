"""Single-train spike statistics: rate, ISI variability, Fano factor, PSTH.

These three scalars form the single-taxel feature set: mean spiking rate
carries overall drive, coefficient of variation of inter-spike intervals
carries short-timescale variability, and the Fano factor of windowed spike
counts carries longer-timescale variability. Statistics that need more
spikes than the train provides are returned as None and flagged, then
imputed as 0 when building feature vectors, so KNN feature dimensionality
stays fixed.

Population (biased) variance and standard deviation are used throughout for
determinism and hand-checkability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .neuron import SpikeTrain

__all__ = [
    "SingleTaxelFeatures",
    "msr",
    "cv_isi",
    "fano",
    "psth",
    "single_taxel_features",
]

DEFAULT_FANO_WINDOW_S = 0.5


def msr(train: SpikeTrain) -> float:
    """Mean spiking rate: spike count divided by train duration (Hz)."""
    if train.duration_s <= 0:
        raise ValueError("msr requires a positive duration")
    return train.num_spikes / train.duration_s


def cv_isi(train: SpikeTrain) -> Optional[float]:
    """Coefficient of variation of the inter-spike intervals.

    Population standard deviation over mean. Undefined (None) with fewer
    than two intervals.
    """
    isis = train.isis()
    if isis.size < 2:
        return None
    return float(isis.std() / isis.mean())


def fano(train: SpikeTrain, window_s: float = DEFAULT_FANO_WINDOW_S) -> Optional[float]:
    """Fano factor: variance over mean of spike counts in tiling windows.

    Windows are non-overlapping, tile [0, duration) and the trailing
    partial window is discarded. Undefined (None) when the mean count is 0.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    n_windows = int(np.floor(train.duration_s / window_s + 1e-9))
    if n_windows < 2:
        raise ValueError("duration must cover at least two windows")
    idx = np.floor(train.spike_times_s / window_s).astype(np.int64)
    counts = np.bincount(idx[idx < n_windows], minlength=n_windows)
    mean = counts.mean()
    if mean == 0:
        return None
    return float(counts.var() / mean)


def psth(
    trains: Sequence[SpikeTrain], bin_s: float
) -> tuple[np.ndarray, np.ndarray]:
    """Post-stimulus time histogram over repeated trials.

    Returns (rates_hz, bin_edges). Per-bin spike counts are summed over
    trials and divided by (trials * bin_s). The last bin may be partial so
    that every spike is counted; its rate then refers to the nominal bin
    width.
    """
    if not trains:
        raise ValueError("psth requires at least one trial")
    if bin_s <= 0:
        raise ValueError("bin_s must be positive")
    duration = trains[0].duration_s
    if any(t.duration_s != duration for t in trains):
        raise ValueError("all trials must share the same duration")
    n_bins = int(np.ceil(duration / bin_s - 1e-9))
    n_bins = max(n_bins, 1)
    counts = np.zeros(n_bins, dtype=np.int64)
    for train in trains:
        idx = np.floor(train.spike_times_s / bin_s).astype(np.int64)
        np.clip(idx, 0, n_bins - 1, out=idx)
        counts += np.bincount(idx, minlength=n_bins)
    rates = counts / (len(trains) * bin_s)
    edges = np.arange(n_bins + 1, dtype=np.float64) * bin_s
    return rates, edges


@dataclass(frozen=True)
class SingleTaxelFeatures:
    """Feature triple for one taxel's train, with definedness flags."""

    msr_hz: float
    cv_isi: float
    fano: float
    cv_defined: bool
    fano_defined: bool
    taxel_index: int = 0
    window_s: float = DEFAULT_FANO_WINDOW_S

    def vector(self) -> np.ndarray:
        """Fixed-length feature vector; undefined statistics imputed as 0."""
        return np.array([self.msr_hz, self.cv_isi, self.fano], dtype=np.float64)

    @property
    def num_undefined(self) -> int:
        return int(not self.cv_defined) + int(not self.fano_defined)


def single_taxel_features(
    train: SpikeTrain,
    taxel_index: int = 0,
    window_s: float = DEFAULT_FANO_WINDOW_S,
) -> SingleTaxelFeatures:
    """Compute the (MSR, CV_ISI, Fano) triple with undefined values as 0."""
    cv = cv_isi(train)
    f = fano(train, window_s)
    return SingleTaxelFeatures(
        msr_hz=msr(train),
        cv_isi=0.0 if cv is None else cv,
        fano=0.0 if f is None else f,
        cv_defined=cv is not None,
        fano_defined=f is not None,
        taxel_index=taxel_index,
        window_s=window_s,
    )
