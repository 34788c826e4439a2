"""Gray-level co-occurrence matrices over 3-D volumes and Haralick features.

A co-occurrence matrix at offset (dx, dy, dz) counts ordered pairs of gray
levels: entry (i, j) is the number of voxels holding level i whose partner
voxel at the offset holds level j, with out-of-bounds partners skipped.
Matrices are deliberately left asymmetric (the direction set below spans a
half-space, so symmetrizing would double-count). The 52 standard offsets —
13 directions times distances 1, 2, 4, 8 — are averaged and normalized into
a single mean matrix that is approximately rotation invariant; offsets whose
distance exceeds the volume extent contribute zero matrices to the average,
which the final normalization absorbs. Three scalar statistics (contrast,
correlation, angular second moment) summarize the mean matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .neuron import SpikeArray
from .volume import (
    DEFAULT_BIN_S,
    DEFAULT_NUM_LEVELS,
    QuantizedVolume,
    Quantizer,
    ResponseVolume,
    build_volume,
    collapse_time,
    quantize,
)

__all__ = [
    "OffsetVector",
    "Glcm",
    "MeanGlcm",
    "HaralickFeatures",
    "DEFAULT_DISTANCES",
    "standard_offsets",
    "glcm",
    "mean_glcm",
    "haralick",
    "glcm_features",
    "write_mean_glcm_csv",
    "FEATURE_NAMES",
]

DEFAULT_DISTANCES = (1, 2, 4, 8)
FEATURE_NAMES = ("contrast", "correlation", "asm")

# 13 direction templates (unit offsets for distance 1) spanning the
# half-space of ordered-pair directions: 4 purely in-plane, 9 reaching one
# step back along the time axis.
_DIRECTION_TEMPLATES = (
    (0, 1, 0),
    (-1, 1, 0),
    (-1, 0, 0),
    (-1, -1, 0),
    (0, 1, -1),
    (0, 0, -1),
    (0, -1, -1),
    (-1, 0, -1),
    (1, 0, -1),
    (-1, 1, -1),
    (1, -1, -1),
    (-1, -1, -1),
    (1, 1, -1),
)


@dataclass(frozen=True)
class OffsetVector:
    """Signed integer voxel offset with its direction id and distance."""

    dx: int
    dy: int
    dz: int
    direction_id: int
    distance: int

    def __post_init__(self):
        if self.dx == self.dy == self.dz == 0:
            raise ValueError("offset must be non-zero")


@dataclass(frozen=True)
class Glcm:
    """Raw ordered-pair count matrix for a single offset."""

    counts: np.ndarray
    offset: OffsetVector
    pair_count: int


@dataclass(frozen=True)
class MeanGlcm:
    """Offset-averaged, normalized co-occurrence matrix (sums to 1)."""

    p: np.ndarray
    source_pair_total: int


@dataclass(frozen=True)
class HaralickFeatures:
    """Contrast, correlation and angular second moment of a MeanGlcm.

    Correlation is undefined when either marginal has zero variance
    (e.g. constant volumes); it is then imputed as 0 and flagged.
    """

    contrast: float
    correlation: float
    asm: float
    correlation_defined: bool = True

    def vector(self) -> np.ndarray:
        return np.array(
            [self.contrast, self.correlation, self.asm], dtype=np.float64
        )


def standard_offsets(
    distances: Sequence[int] = DEFAULT_DISTANCES,
) -> list[OffsetVector]:
    """The 52 standard offsets: 13 directions x distances (1, 2, 4, 8).

    Order is deterministic: direction-major, distance-minor.
    """
    offsets = []
    for direction_id, (tx, ty, tz) in enumerate(_DIRECTION_TEMPLATES, start=1):
        for dist in distances:
            offsets.append(
                OffsetVector(
                    dx=tx * dist,
                    dy=ty * dist,
                    dz=tz * dist,
                    direction_id=direction_id,
                    distance=int(dist),
                )
            )
    return offsets


def glcm(vol: QuantizedVolume, offset: OffsetVector) -> Glcm:
    """Count ordered level pairs of the volume at one offset.

    Pairs whose partner voxel falls outside the volume are skipped; an
    offset larger than the volume extent yields the zero matrix with
    pair_count 0 (not an error).
    """
    counts = _kernels.glcm_counts(
        vol.levels, offset.dx, offset.dy, offset.dz, vol.num_levels
    )
    return Glcm(counts=counts, offset=offset, pair_count=int(counts.sum()))


def mean_glcm(vol: QuantizedVolume, offsets: Sequence[OffsetVector]) -> MeanGlcm:
    """Average the per-offset count matrices and normalize to total mass 1.

    Zero matrices from empty offsets participate in the average; the final
    normalization makes the constant divisor immaterial.
    """
    if not offsets:
        raise ValueError("offsets must be non-empty")
    n = vol.num_levels
    acc = np.zeros((n, n), dtype=np.float64)
    pair_total = 0
    for off in offsets:
        g = glcm(vol, off)
        acc += g.counts
        pair_total += g.pair_count
    if pair_total == 0:
        raise ValueError("undefined mean matrix: every offset produced zero pairs")
    acc /= len(offsets)
    return MeanGlcm(p=acc / acc.sum(), source_pair_total=pair_total)


def haralick(m: MeanGlcm) -> HaralickFeatures:
    """Contrast, correlation and ASM of a normalized co-occurrence matrix."""
    p = m.p
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError("matrix must be normalized to total mass 1")
    n = p.shape[0]
    i = np.arange(n, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float((i * px).sum())
    mu_y = float((i * py).sum())
    var_x = float((px * (i - mu_x) ** 2).sum())
    var_y = float((py * (i - mu_y) ** 2).sum())
    ii, jj = np.meshgrid(i, i, indexing="ij")
    contrast = float((p * (ii - jj) ** 2).sum())
    asm = float((p * p).sum())
    sigma_prod = np.sqrt(var_x) * np.sqrt(var_y)
    if sigma_prod == 0:
        return HaralickFeatures(
            contrast=contrast, correlation=0.0, asm=asm, correlation_defined=False
        )
    corr = float((p * (ii - mu_x) * (jj - mu_y)).sum() / sigma_prod)
    return HaralickFeatures(contrast=contrast, correlation=corr, asm=asm)


def write_mean_glcm_csv(m: MeanGlcm, path) -> None:
    """Debug dump of the normalized mean matrix as N x N CSV."""
    with open(path, "w") as fh:
        for row in m.p:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def glcm_features(
    source: Union[SpikeArray, ResponseVolume],
    mode: str,
    quantizer: Quantizer,
    num_levels: int = DEFAULT_NUM_LEVELS,
    offsets: Sequence[OffsetVector] = None,
    bin_s: float = DEFAULT_BIN_S,
) -> np.ndarray:
    """Full co-occurrence feature pipeline: volume -> levels -> 3-vector.

    ``mode`` is "glcm3d" (time-resolved volume) or "glcm2d" (volume first
    collapsed along time; the same offsets are applied, the purely in-plane
    directions carry the signal). Accepts either a spike array, which is
    binned with ``bin_s``, or a prebuilt response volume. Undefined
    correlation is imputed as 0 so the vector length is fixed.
    """
    if mode not in ("glcm3d", "glcm2d"):
        raise ValueError(f"unknown mode {mode!r}")
    vol = source if isinstance(source, ResponseVolume) else build_volume(source, bin_s)
    if mode == "glcm2d":
        vol = collapse_time(vol)
    qvol = quantize(vol, quantizer, num_levels)
    if offsets is None:
        offsets = standard_offsets()
    return haralick(mean_glcm(qvol, offsets)).vector()
