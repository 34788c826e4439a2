"""Analog sensor traces: data model, CSV I/O, synthetic generation, preprocessing.

A trace holds the raw multi-channel output of a tactile sensor grid that was
slid across a textured surface at constant speed. Recorded data can be loaded
from CSV; in its absence, :func:`generate_trace` produces synthetic
sliding-contact traces from a parametric 1-D surface profile. All outputs of
the generator are explicitly synthetic stand-ins for hardware recordings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "GridGeometry",
    "SensorTrace",
    "TextureParams",
    "load_trace",
    "save_trace",
    "generate_trace",
    "preprocess",
    "slice_samples",
]


@dataclass(frozen=True)
class GridGeometry:
    """Rectangular taxel grid layout.

    Defaults describe a 4x4 array over a 169 mm^2 active area with 4 mm^2
    taxels, which gives a center-to-center pitch of sqrt(169)/4 = 3.25 mm.
    """

    rows: int = 4
    cols: int = 4
    pitch_mm: float = 3.25
    taxel_area_mm2: float = 4.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and one column")
        if self.pitch_mm <= 0:
            raise ValueError("pitch_mm must be positive")

    @property
    def num_taxels(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class SensorTrace:
    """Multi-channel analog time series with grid geometry and metadata.

    ``channels`` is a [num_taxels x num_samples] float array, taxels ordered
    row-major by grid position. Instances are treated as immutable; do not
    mutate ``channels`` after construction.
    """

    geometry: GridGeometry
    sample_rate_hz: float
    channels: np.ndarray
    label: str = ""
    velocity_mm_s: float = 0.0
    trial_id: int = 0
    phase_markers: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        object.__setattr__(self, "channels", ch)
        if ch.ndim != 2:
            raise ValueError("channels must be a 2-D [taxels x samples] array")
        if ch.shape[0] != self.geometry.num_taxels:
            raise ValueError(
                f"channel count mismatch: got {ch.shape[0]} channels for a "
                f"{self.geometry.rows}x{self.geometry.cols} grid"
            )
        if ch.shape[1] < 1:
            raise ValueError("channels must contain at least one sample")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.isfinite(ch).all():
            raise ValueError("channels contain non-finite samples")

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate_hz


@dataclass(frozen=True)
class TextureParams:
    """Parametric 1-D surface profile for the synthetic trace generator.

    The profile is a weighted sum of integer harmonics of ``spatial_period_mm``
    plus a frozen band of random sinusoids ("roughness") drawn once from
    ``profile_seed`` — the same seed always describes the same surface.
    """

    spatial_period_mm: float
    amplitude: float
    harmonic_weights: tuple[float, ...] = (1.0,)
    roughness_noise_sd: float = 0.0
    baseline: float = 0.0
    profile_seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "harmonic_weights", tuple(float(w) for w in self.harmonic_weights)
        )
        if self.spatial_period_mm <= 0:
            raise ValueError("spatial_period_mm must be positive")
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1]")
        if self.roughness_noise_sd < 0:
            raise ValueError("roughness_noise_sd must be non-negative")
        if self.baseline < 0 or self.baseline + self.amplitude > 1.0 + 1e-12:
            raise ValueError("baseline + amplitude must not exceed 1")


_ROUGHNESS_COMPONENTS = 32
# band kept below ~0.5 cycles/mm so roughness structure survives the
# per-voxel time binning at every tested sliding velocity
_ROUGHNESS_FREQ_RANGE = (0.05, 0.35)  # cycles/mm


def _profile_values(texture: TextureParams, x_mm: np.ndarray) -> np.ndarray:
    """Evaluate the frozen 1-D surface profile h(x) at positions in mm."""
    h = np.full(x_mm.shape, texture.baseline, dtype=np.float64)
    weights = np.asarray(texture.harmonic_weights, dtype=np.float64)
    norm = np.abs(weights).sum()
    if texture.amplitude > 0 and norm > 0:
        harm = np.zeros_like(x_mm)
        for m, w in enumerate(weights, start=1):
            harm += w * np.sin(2.0 * np.pi * m * x_mm / texture.spatial_period_mm)
        # map the [-1, 1] harmonic sum onto [0, amplitude]
        h += texture.amplitude * 0.5 * (1.0 + harm / norm)
    if texture.roughness_noise_sd > 0:
        rng = np.random.default_rng(texture.profile_seed)
        freqs = rng.uniform(*_ROUGHNESS_FREQ_RANGE, _ROUGHNESS_COMPONENTS)
        phases = rng.uniform(0.0, 2.0 * np.pi, _ROUGHNESS_COMPONENTS)
        rough = np.zeros_like(x_mm)
        for f, p in zip(freqs, phases):
            rough += np.sin(2.0 * np.pi * f * x_mm + p)
        scale = texture.roughness_noise_sd * math.sqrt(2.0 / _ROUGHNESS_COMPONENTS)
        h += scale * rough
    return h


def generate_trace(
    texture: TextureParams,
    geometry: GridGeometry,
    velocity_mm_s: float,
    slide_distance_mm: float,
    sample_rate_hz: float = 1000.0,
    noise_sd: float = 0.0,
    seed: int = 0,
    label: str = "",
    trial_id: int = 0,
) -> SensorTrace:
    """Generate a synthetic sliding-phase trace.

    Each taxel samples the texture profile at x = velocity*t + x_taxel, where
    x_taxel is the taxel's column offset along the sliding axis (column index
    times pitch); rows share the same offset because the profile is 1-D.
    White measurement noise with sd ``noise_sd`` is added from ``seed`` and
    the result is clipped to [0, 1]. The same (texture, seed) pair always
    yields a bit-identical trace.
    """
    if velocity_mm_s <= 0:
        raise ValueError("velocity_mm_s must be positive")
    if slide_distance_mm <= 0:
        raise ValueError("slide_distance_mm must be positive")
    if sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be positive")
    duration_s = slide_distance_mm / velocity_mm_s
    num_samples = int(round(duration_s * sample_rate_hz))
    if num_samples < 1:
        raise ValueError("slide too short for the sample rate")
    t = np.arange(num_samples, dtype=np.float64) / sample_rate_hz
    channels = np.empty((geometry.num_taxels, num_samples), dtype=np.float64)
    for col in range(geometry.cols):
        x = velocity_mm_s * t + col * geometry.pitch_mm
        col_signal = _profile_values(texture, x)
        for row in range(geometry.rows):
            channels[row * geometry.cols + col] = col_signal
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        channels = channels + rng.normal(0.0, noise_sd, channels.shape)
    np.clip(channels, 0.0, 1.0, out=channels)
    return SensorTrace(
        geometry=geometry,
        sample_rate_hz=sample_rate_hz,
        channels=channels,
        label=label,
        velocity_mm_s=velocity_mm_s,
        trial_id=trial_id,
    )


def preprocess(trace: SensorTrace, cutoff_hz: float = 50.0) -> SensorTrace:
    """Low-pass filter each channel, then normalize by the global maximum.

    The filter is a first-order IIR low-pass (forward pass, initial state
    equal to the first sample, exact zero-order-hold discretization) with the
    given cutoff. Normalization divides ALL channels by the single largest
    post-filter value over all channels and samples, so relative channel
    activation levels are preserved and the global maximum becomes exactly 1.
    """
    if not 0 < cutoff_hz < trace.sample_rate_hz / 2:
        raise ValueError("cutoff_hz must lie in (0, sample_rate/2)")
    beta = math.exp(-2.0 * math.pi * cutoff_hz / trace.sample_rate_hz)
    zi = beta * trace.channels[:, :1]
    filtered, _ = lfilter([1.0 - beta], [1.0, -beta], trace.channels, axis=1, zi=zi)
    global_max = filtered.max()
    if global_max <= 0:
        raise ValueError("degenerate trace: global maximum after filtering is <= 0")
    return SensorTrace(
        geometry=trace.geometry,
        sample_rate_hz=trace.sample_rate_hz,
        channels=filtered / global_max,
        label=trace.label,
        velocity_mm_s=trace.velocity_mm_s,
        trial_id=trace.trial_id,
        phase_markers=trace.phase_markers,
    )


def slice_samples(trace: SensorTrace, start: int, stop: int) -> SensorTrace:
    """Return the trace restricted to samples [start, stop).

    Useful for trimming recorded traces to the sliding phase using the
    trace's phase markers; synthetic traces are slide-only already.
    """
    if not 0 <= start < stop <= trace.num_samples:
        raise ValueError("invalid sample slice")
    return SensorTrace(
        geometry=trace.geometry,
        sample_rate_hz=trace.sample_rate_hz,
        channels=trace.channels[:, start:stop].copy(),
        label=trace.label,
        velocity_mm_s=trace.velocity_mm_s,
        trial_id=trace.trial_id,
    )


def _taxel_column_names(geometry: GridGeometry) -> list[str]:
    return [
        f"tx{r}{c}" for r in range(geometry.rows) for c in range(geometry.cols)
    ]


def save_trace(trace: SensorTrace, path) -> None:
    """Write a trace in the tactex CSV format (see :func:`load_trace`).

    Floats are written with shortest round-trip precision, so a
    load -> save cycle reproduces numeric content exactly.
    """
    g = trace.geometry
    header = (
        f"# rows={g.rows} cols={g.cols} pitch_mm={g.pitch_mm!r} "
        f"rate_hz={trace.sample_rate_hz!r} label={trace.label} "
        f"velocity_mm_s={trace.velocity_mm_s!r} trial={trace.trial_id}"
    )
    names = _taxel_column_names(g)
    rate = trace.sample_rate_hz
    cols = trace.channels
    lines = [header, "t_ms," + ",".join(names)]
    for k in range(trace.num_samples):
        t_ms = 1000.0 * k / rate
        row = [repr(t_ms)]
        row.extend(repr(v) for v in cols[:, k].tolist())
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header_tokens(tokens: Sequence[str], lineno: int) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ValueError(f"line {lineno}: malformed header token {tok!r}")
        key, value = tok.split("=", 1)
        out[key] = value
    return out


def load_trace(path, format: str = "csv") -> SensorTrace:
    """Load a trace from the tactex CSV format.

    The format is one or more ``#``-prefixed header lines carrying
    ``key=value`` metadata (rows, cols, pitch_mm, rate_hz, label,
    velocity_mm_s, trial), a column-name row ``t_ms,tx00,...``, then numeric
    rows. Taxel columns are row-major by grid position. Malformed input is
    reported with its line number.
    """
    if format != "csv":
        raise ValueError(f"unsupported trace format: {format!r}")
    meta: dict = {}
    data_rows: list[list[float]] = []
    expected_cells: Optional[int] = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta.update(_parse_header_tokens(line[1:].split(), lineno))
                continue
            cells = line.split(",")
            if cells[0] == "t_ms":
                expected_cells = len(cells)
                continue
            if expected_cells is None:
                raise ValueError(f"line {lineno}: data before column header row")
            if len(cells) != expected_cells:
                raise ValueError(
                    f"line {lineno}: ragged row, expected {expected_cells} "
                    f"cells, got {len(cells)}"
                )
            try:
                data_rows.append([float(c) for c in cells])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric cell") from None
    try:
        geometry = GridGeometry(
            rows=int(meta["rows"]),
            cols=int(meta["cols"]),
            pitch_mm=float(meta.get("pitch_mm", 3.25)),
            taxel_area_mm2=float(meta.get("taxel_area_mm2", 4.0)),
        )
        rate = float(meta["rate_hz"])
        label = meta.get("label", "")
        velocity = float(meta.get("velocity_mm_s", 0.0))
        trial = int(meta.get("trial", 0))
    except KeyError as exc:
        raise ValueError(f"malformed header: missing key {exc}") from None
    if expected_cells is None or not data_rows:
        raise ValueError("no data rows found")
    n_taxels = expected_cells - 1  # first column is t_ms
    if n_taxels != geometry.num_taxels:
        raise ValueError(
            f"channel count mismatch: header declares "
            f"{geometry.rows}x{geometry.cols}={geometry.num_taxels} taxels "
            f"but found {n_taxels} taxel columns"
        )
    data = np.asarray(data_rows, dtype=np.float64)
    return SensorTrace(
        geometry=geometry,
        sample_rate_hz=rate,
        channels=np.ascontiguousarray(data[:, 1:].T),
        label=label,
        velocity_mm_s=velocity,
        trial_id=trial,
    )
