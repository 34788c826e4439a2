import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactex.neuron import SpikeArray, SpikeTrain
from tactex.traces import GridGeometry
from tactex.volume import (
    Quantizer,
    ResponseVolume,
    build_volume,
    collapse_time,
    fit_quantizer,
    perturb_spatial,
    quantize,
    truncate_time,
)

from conftest import random_spike_array

GEO = GridGeometry()


def empty_array(duration=4.0):
    trains = tuple(SpikeTrain(np.array([]), duration) for _ in range(16))
    return SpikeArray(trains=trains, geometry=GEO)


def volume_from_values(values, bin_s=0.2):
    return ResponseVolume(values=np.asarray(values, float), bin_s=bin_s, geometry=GEO)


class TestBuildVolume:
    def test_empty_array_gives_zero_volume(self):
        vol = build_volume(empty_array(4.0), 0.2)
        assert vol.values.shape == (4, 4, 20)
        assert not vol.values.any()

    def test_hand_computed_bin_rates(self):
        trains = [SpikeTrain(np.array([]), 1.0) for _ in range(16)]
        trains[0] = SpikeTrain(np.array([0.05, 0.10, 0.25]), 1.0)
        arr = SpikeArray(trains=tuple(trains), geometry=GEO)
        vol = build_volume(arr, 0.2)
        np.testing.assert_allclose(vol.values[0, 0], [10.0, 5.0, 0.0, 0.0, 0.0])

    def test_exact_multiple_duration_bin_count(self):
        # 18 s / 0.2 s must give 90 bins despite float division shortfall
        vol = build_volume(empty_array(18.0), 0.2)
        assert vol.t_bins == 90

    def test_spike_mass_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            arr = random_spike_array(rng, duration=3.7)
            vol = build_volume(arr, 0.25)
            window = vol.t_bins * 0.25
            for idx, train in enumerate(arr.trains):
                expected = int((train.spike_times_s < window).sum())
                got = vol.values[idx // 4, idx % 4].sum() * 0.25
                assert got == pytest.approx(expected)

    def test_rejects_short_duration(self):
        with pytest.raises(ValueError):
            build_volume(empty_array(0.1), 0.2)


class TestQuantizer:
    def test_fit_uses_training_maximum(self):
        vols = [volume_from_values(np.full((4, 4, 5), 10.0)),
                volume_from_values(np.full((4, 4, 5), 40.0))]
        q = fit_quantizer(vols, 8)
        assert q == Quantizer(0.0, 40.0)

    def test_hand_computed_level(self):
        # max 40, 8 levels -> width 5; value 12 -> level 2
        q = Quantizer(0.0, 40.0)
        vol = volume_from_values(np.full((4, 4, 1), 12.0))
        assert quantize(vol, q, 8).levels[0, 0, 0] == 2

    def test_values_above_hi_clamp_to_top_level(self):
        q = Quantizer(0.0, 40.0)
        vol = volume_from_values(np.full((4, 4, 1), 95.0))
        assert quantize(vol, q, 8).levels.max() == 7

    def test_all_levels_used_when_values_span_range(self):
        rng = np.random.default_rng(4)
        values = rng.uniform(0.0, 30.0, (4, 4, 40))
        values.flat[0] = 0.0
        values.flat[1] = 30.0
        vol = volume_from_values(values)
        q = fit_quantizer([vol], 8)
        levels = quantize(vol, q, 8).levels
        assert set(np.unique(levels)) == set(range(8))

    def test_quantization_monotone(self):
        rng = np.random.default_rng(5)
        q = Quantizer(0.0, 25.0)
        a = rng.uniform(0, 30, (4, 4, 12))
        b = a + rng.uniform(0, 5, a.shape)
        la = quantize(volume_from_values(a), q, 8).levels
        lb = quantize(volume_from_values(b), q, 8).levels
        assert (lb >= la).all()

    def test_requantizing_bin_centers_is_idempotent(self):
        rng = np.random.default_rng(6)
        q = Quantizer(0.0, 37.0)
        n = 8
        vol = volume_from_values(rng.uniform(0, 45, (4, 4, 9)))
        levels = quantize(vol, q, n).levels
        width = (q.hi - q.lo) / n
        centers = q.lo + (levels + 0.5) * width
        again = quantize(volume_from_values(centers), q, n).levels
        np.testing.assert_array_equal(again, levels)

    def test_fit_rejects_degenerate(self):
        with pytest.raises(ValueError):
            fit_quantizer([], 8)
        with pytest.raises(ValueError):
            fit_quantizer([volume_from_values(np.zeros((4, 4, 3)))], 8)
        with pytest.raises(ValueError):
            fit_quantizer([volume_from_values(np.ones((4, 4, 3)))], 1)


class TestPerturbSpatial:
    def test_full_grid_derangement_moves_every_taxel(self):
        rng = np.random.default_rng(7)
        arr = random_spike_array(rng)
        out = perturb_spatial(arr, 16, seed=1)
        moved = sum(
            not np.array_equal(a.spike_times_s, b.spike_times_s)
            for a, b in zip(arr.trains, out.trains)
        )
        assert moved == 16

    def test_multiset_of_trains_preserved(self):
        rng = np.random.default_rng(8)
        arr = random_spike_array(rng)
        out = perturb_spatial(arr, 16, seed=2)
        orig = sorted(tuple(t.spike_times_s) for t in arr.trains)
        new = sorted(tuple(t.spike_times_s) for t in out.trains)
        assert orig == new

    def test_n_two_swaps_the_selected_pair(self):
        rng = np.random.default_rng(9)
        arr = random_spike_array(rng)
        out = perturb_spatial(arr, 2, seed=3)
        changed = [
            i
            for i in range(16)
            if not np.array_equal(arr.trains[i].spike_times_s, out.trains[i].spike_times_s)
        ]
        assert len(changed) == 2
        i, j = changed
        np.testing.assert_array_equal(
            out.trains[i].spike_times_s, arr.trains[j].spike_times_s
        )
        np.testing.assert_array_equal(
            out.trains[j].spike_times_s, arr.trains[i].spike_times_s
        )

    def test_partial_perturbation_leaves_others_untouched(self):
        rng = np.random.default_rng(10)
        arr = random_spike_array(rng)
        out = perturb_spatial(arr, 4, seed=4)
        changed = [
            i
            for i in range(16)
            if not np.array_equal(arr.trains[i].spike_times_s, out.trains[i].spike_times_s)
        ]
        assert len(changed) == 4

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(11)
        arr = random_spike_array(rng)
        o1 = perturb_spatial(arr, 8, seed=42)
        o2 = perturb_spatial(arr, 8, seed=42)
        for a, b in zip(o1.trains, o2.trains):
            np.testing.assert_array_equal(a.spike_times_s, b.spike_times_s)

    def test_rejects_invalid_n(self):
        rng = np.random.default_rng(12)
        arr = random_spike_array(rng)
        with pytest.raises(ValueError):
            perturb_spatial(arr, 1, seed=0)
        with pytest.raises(ValueError):
            perturb_spatial(arr, 17, seed=0)


class TestCollapseTime:
    def test_mean_over_time(self):
        values = np.zeros((4, 4, 4))
        values[0, 0] = [10.0, 5.0, 0.0, 5.0]
        out = collapse_time(volume_from_values(values))
        assert out.t_bins == 1
        assert out.values[0, 0, 0] == pytest.approx(5.0)
        assert out.bin_s == pytest.approx(0.8)

    def test_identity_on_single_slab(self):
        vol = volume_from_values(np.random.default_rng(0).uniform(0, 5, (4, 4, 1)))
        out = collapse_time(vol)
        np.testing.assert_array_equal(out.values, vol.values)

    def test_matches_whole_train_rate_up_to_truncation(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            arr = random_spike_array(rng, duration=4.0)
            out = collapse_time(build_volume(arr, 0.2))
            for idx, train in enumerate(arr.trains):
                # duration is an exact multiple of the bin: no truncation
                assert out.values[idx // 4, idx % 4, 0] == pytest.approx(
                    train.num_spikes / 4.0
                )

    def test_preserves_spike_mass(self):
        rng = np.random.default_rng(14)
        arr = random_spike_array(rng, duration=3.5)
        vol = build_volume(arr, 0.2)
        out = collapse_time(vol)
        np.testing.assert_allclose(
            out.values[:, :, 0] * out.bin_s, vol.values.sum(axis=2) * vol.bin_s
        )


class TestTruncateTime:
    def test_full_fraction_is_identity(self):
        vol = volume_from_values(np.random.default_rng(1).uniform(0, 5, (4, 4, 30)))
        out = truncate_time(vol, 1.0)
        np.testing.assert_array_equal(out.values, vol.values)

    def test_floor_of_fraction_times_bins(self):
        vol = volume_from_values(np.zeros((4, 4, 90)))
        assert truncate_time(vol, 0.3).t_bins == 27

    def test_commutes_with_quantization(self):
        rng = np.random.default_rng(2)
        vol = volume_from_values(rng.uniform(0, 20, (4, 4, 40)))
        q = Quantizer(0.0, 20.0)
        a = quantize(truncate_time(vol, 0.45), q, 8).levels
        b = quantize(vol, q, 8).levels[:, :, : a.shape[2]]
        np.testing.assert_array_equal(a, b)

    def test_rejects_empty_result(self):
        vol = volume_from_values(np.zeros((4, 4, 5)))
        with pytest.raises(ValueError):
            truncate_time(vol, 0.01)
        with pytest.raises(ValueError):
            truncate_time(vol, 1.5)

    @given(fraction=st.floats(0.05, 1.0), t_bins=st.integers(2, 120))
    @settings(max_examples=40, deadline=None)
    def test_bin_count_is_guarded_floor(self, fraction, t_bins):
        vol = volume_from_values(np.zeros((4, 4, t_bins)))
        try:
            out = truncate_time(vol, fraction)
        except ValueError:
            assert int(np.floor(fraction * t_bins + 1e-9)) < 1
            return
        assert out.t_bins == int(np.floor(fraction * t_bins + 1e-9))


class TestVolumeCsvDump:
    def test_one_row_per_voxel(self, tmp_path):
        from tactex.volume import write_volume_csv

        rng = np.random.default_rng(30)
        vol = volume_from_values(rng.uniform(0, 20, (4, 4, 3)))
        q = Quantizer(0.0, 20.0)
        qv = quantize(vol, q, 8)
        path = tmp_path / "vol.csv"
        write_volume_csv(vol, qv, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,c,k,msr,level"
        assert len(lines) == 1 + 4 * 4 * 3
        r, c, k, msr, level = lines[1].split(",")
        assert (int(r), int(c), int(k)) == (0, 0, 0)
        assert float(msr) == vol.values[0, 0, 0]
        assert int(level) == qv.levels[0, 0, 0]
