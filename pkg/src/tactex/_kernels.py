"""Hot numeric kernels: spiking-neuron integration and co-occurrence counting.

Each kernel exists in two interchangeable versions: a numba ``@njit`` one and
a pure-numpy fallback. The active version is chosen at import time; setting
the environment variable ``TACTEX_DISABLE_NUMBA=1`` (or ``true``/``yes``)
forces the numpy path, e.g. on platforms where numba is unavailable or for
benchmarking (see ``benchmarks/bench_kernels.py``). Both versions perform the
same float64 operations in the same order, so results are identical.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "using_numba",
    "izhikevich_raster",
    "izhikevich_raster_numpy",
    "izhikevich_raster_numba",
    "glcm_counts",
    "glcm_counts_numpy",
    "glcm_counts_numba",
]


def izhikevich_raster_numpy(channels, dt_ms, a, b, c, d, v_peak, gain):
    """Integrate a bank of regular-spiking neurons, one per channel row.

    The membrane potential is advanced in two half-steps per sample and the
    adaptation variable in one full step (the standard stable update for this
    model); input current is the channel value times ``gain``, held constant
    over the step. A step whose end state reaches ``v_peak`` marks a spike
    and triggers the after-spike reset.

    Returns ``(raster, bad_channel, bad_step)`` where ``raster`` is a uint8
    [channels x samples] spike matrix and the latter two are ``-1`` unless
    the state turned non-finite at that channel/step.
    """
    channels = np.ascontiguousarray(channels, dtype=np.float64)
    n_ch, n_samples = channels.shape
    v = np.full(n_ch, c, dtype=np.float64)
    u = np.full(n_ch, b * c, dtype=np.float64)
    raster = np.zeros((n_ch, n_samples), dtype=np.uint8)
    half = 0.5 * dt_ms
    # overflow is caught explicitly via the isfinite check below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_samples):
            i_in = gain * channels[:, k]
            v += half * (0.04 * v * v + 5.0 * v + 140.0 - u + i_in)
            v += half * (0.04 * v * v + 5.0 * v + 140.0 - u + i_in)
            u += dt_ms * (a * (b * v - u))
            if not (np.isfinite(v).all() and np.isfinite(u).all()):
                bad = np.flatnonzero(~(np.isfinite(v) & np.isfinite(u)))[0]
                return raster, int(bad), k
            fired = v >= v_peak
            if fired.any():
                raster[fired, k] = 1
                v[fired] = c
                u[fired] += d
    return raster, -1, -1


def glcm_counts_numpy(levels, dx, dy, dz, n_levels):
    """Count ordered level pairs at offset (dx, dy, dz) inside a 3-D grid.

    Out-of-bounds partner voxels are skipped. Returns an int64
    [n_levels x n_levels] matrix indexed [source level, partner level].
    """
    nx, ny, nz = levels.shape
    x0, x1 = max(0, -dx), nx - max(0, dx)
    y0, y1 = max(0, -dy), ny - max(0, dy)
    z0, z1 = max(0, -dz), nz - max(0, dz)
    if x0 >= x1 or y0 >= y1 or z0 >= z1:
        return np.zeros((n_levels, n_levels), dtype=np.int64)
    src = levels[x0:x1, y0:y1, z0:z1]
    dst = levels[x0 + dx:x1 + dx, y0 + dy:y1 + dy, z0 + dz:z1 + dz]
    flat = src.ravel().astype(np.int64) * n_levels + dst.ravel()
    counts = np.bincount(flat, minlength=n_levels * n_levels)
    return counts.reshape(n_levels, n_levels).astype(np.int64)


_DISABLE = os.environ.get("TACTEX_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

izhikevich_raster_numba = None
glcm_counts_numba = None

if not _DISABLE:
    try:
        import numba

        @numba.njit(cache=True)
        def _izhikevich_raster_jit(channels, dt_ms, a, b, c, d, v_peak, gain):
            n_ch, n_samples = channels.shape
            raster = np.zeros((n_ch, n_samples), dtype=np.uint8)
            half = 0.5 * dt_ms
            for ci in range(n_ch):
                v = c
                u = b * c
                for k in range(n_samples):
                    i_in = gain * channels[ci, k]
                    v += half * (0.04 * v * v + 5.0 * v + 140.0 - u + i_in)
                    v += half * (0.04 * v * v + 5.0 * v + 140.0 - u + i_in)
                    u += dt_ms * (a * (b * v - u))
                    if not (np.isfinite(v) and np.isfinite(u)):
                        return raster, ci, k
                    if v >= v_peak:
                        raster[ci, k] = 1
                        v = c
                        u += d
            return raster, -1, -1

        @numba.njit(cache=True)
        def _glcm_counts_jit(levels, dx, dy, dz, n_levels):
            nx, ny, nz = levels.shape
            counts = np.zeros((n_levels, n_levels), dtype=np.int64)
            for x in range(nx):
                xp = x + dx
                if xp < 0 or xp >= nx:
                    continue
                for y in range(ny):
                    yp = y + dy
                    if yp < 0 or yp >= ny:
                        continue
                    for z in range(nz):
                        zp = z + dz
                        if zp < 0 or zp >= nz:
                            continue
                        counts[levels[x, y, z], levels[xp, yp, zp]] += 1
            return counts

        def izhikevich_raster_numba(channels, dt_ms, a, b, c, d, v_peak, gain):
            channels = np.ascontiguousarray(channels, dtype=np.float64)
            return _izhikevich_raster_jit(
                channels, dt_ms, a, b, c, d, v_peak, gain
            )

        def glcm_counts_numba(levels, dx, dy, dz, n_levels):
            return _glcm_counts_jit(
                np.ascontiguousarray(levels), dx, dy, dz, n_levels
            )

    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

using_numba = izhikevich_raster_numba is not None

if using_numba:
    izhikevich_raster = izhikevich_raster_numba
    glcm_counts = glcm_counts_numba
else:
    izhikevich_raster = izhikevich_raster_numpy
    glcm_counts = glcm_counts_numpy
