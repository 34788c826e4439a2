"""End-to-end experiment orchestration over the synthetic corpus.

Every experiment consumes one :class:`~tactex.config.ExperimentConfig` and
returns a plain-dict payload that serializes to byte-identical JSON across
reruns with the same config and master seed (timestamps live in a separate
metadata block added at write time). Gray-level quantizers, feature
standardization statistics and fold assignments are always derived from
training rows only.

Fold assignments are seeded per velocity, so pipelines that must agree (the
full-fraction recognition-time row, the unperturbed perturbation baseline,
and the plain accuracy comparison) share identical folds.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .classify import (
    ConfusionMatrix,
    CvResult,
    Dataset,
    cross_validate,
    holdout_evaluate,
    split_by_velocity,
    stratified_folds,
)
from .config import ExperimentConfig, derive_seed
from .glcm import FEATURE_NAMES, glcm_features, standard_offsets
from .neuron import SpikeArray, encode_array, isi_histogram_sweep
from .spikestats import single_taxel_features
from .traces import generate_trace, preprocess
from .volume import (
    ResponseVolume,
    build_volume,
    collapse_time,
    fit_quantizer,
    perturb_spatial,
    truncate_time,
)

__all__ = [
    "build_corpus",
    "single_taxel_dataset",
    "build_volumes",
    "GlcmCvResult",
    "glcm_cross_validate",
    "run_accuracy_comparison",
    "run_perturbation_study",
    "run_temporal_collapse_study",
    "run_tor_study",
    "run_velocity_invariance_study",
    "run_gain_sweep",
    "run_experiment",
    "run_all",
    "payload_json",
    "write_report",
    "EXPERIMENT_NAMES",
]

EXPERIMENT_NAMES = (
    "accuracy",
    "perturbation",
    "collapse",
    "tor",
    "velocity",
    "gains",
)

SINGLE_TAXEL_FEATURE_NAMES = ("msr_hz", "cv_isi", "fano")


def _velocity_key(velocity: float) -> int:
    # integer form keeps seed paths independent of float formatting
    return int(round(velocity * 1000))


def _generate_trial(cfg: ExperimentConfig, label: str, velocity: float, trial: int):
    texture = cfg.corpus.textures[label]
    seed = derive_seed(
        cfg.master_seed, "trace", label, _velocity_key(velocity), trial
    )
    trace = generate_trace(
        texture,
        cfg.corpus.geometry,
        velocity_mm_s=velocity,
        slide_distance_mm=cfg.corpus.slide_distance_mm,
        sample_rate_hz=cfg.corpus.sample_rate_hz,
        noise_sd=cfg.corpus.noise_sd,
        seed=seed,
        label=label,
        trial_id=trial,
    )
    return preprocess(trace, cfg.cutoff_hz)


def build_corpus(
    cfg: ExperimentConfig, velocities: Optional[Sequence[float]] = None
) -> dict[float, list[SpikeArray]]:
    """Generate, preprocess and spike-encode the whole synthetic corpus.

    Returns velocity -> spike arrays ordered by (label, trial). Only spike
    data is retained; traces are regenerated on demand (they are
    deterministic in the seed path).
    """
    corpus: dict[float, list[SpikeArray]] = {}
    for velocity in velocities if velocities is not None else cfg.corpus.velocities:
        arrays = []
        for label in cfg.corpus.labels:
            for trial in range(cfg.corpus.trials):
                trace = _generate_trial(cfg, label, velocity, trial)
                arrays.append(encode_array(trace, cfg.neuron))
        corpus[velocity] = arrays
    return corpus


def single_taxel_dataset(
    arrays: Sequence[SpikeArray], cfg: ExperimentConfig
) -> tuple[Dataset, int]:
    """Single-taxel feature rows for the configured grid position.

    Returns the dataset and the number of undefined statistics that were
    imputed as zero.
    """
    taxel_index = cfg.taxel_row * cfg.corpus.geometry.cols + cfg.taxel_col
    rows = []
    undefined = 0
    for arr in arrays:
        feats = single_taxel_features(
            arr.train_at(cfg.taxel_row, cfg.taxel_col),
            taxel_index=taxel_index,
            window_s=cfg.fano_window_s,
        )
        undefined += feats.num_undefined
        rows.append(feats.vector())
    ds = Dataset(
        features=np.vstack(rows),
        labels=[a.label for a in arrays],
        velocities=[a.velocity_mm_s for a in arrays],
        trials=[a.trial_id for a in arrays],
        feature_names=SINGLE_TAXEL_FEATURE_NAMES,
    )
    return ds, undefined


def build_volumes(
    arrays: Sequence[SpikeArray], cfg: ExperimentConfig
) -> list[ResponseVolume]:
    return [build_volume(a, cfg.bin_s) for a in arrays]


def _glcm_dataset(
    volumes: Sequence[ResponseVolume],
    quantizer,
    cfg: ExperimentConfig,
    offsets,
) -> Dataset:
    feats = np.vstack(
        [
            glcm_features(v, "glcm3d", quantizer, cfg.num_levels, offsets)
            for v in volumes
        ]
    )
    return Dataset(
        features=feats,
        labels=[v.label for v in volumes],
        velocities=[v.velocity_mm_s for v in volumes],
        trials=[v.trial_id for v in volumes],
        feature_names=FEATURE_NAMES,
    )


@dataclass(frozen=True)
class GlcmCvResult:
    """CV outcome plus the frozen per-fold quantizer ranges used."""

    result: CvResult
    quantizer_ranges: tuple[tuple[float, float], ...]

    @property
    def accuracy(self) -> float:
        return self.result.accuracy


def glcm_cross_validate(
    volumes: Sequence[ResponseVolume],
    cfg: ExperimentConfig,
    fold_seed,
    mode: str = "glcm3d",
) -> GlcmCvResult:
    """Cross-validate co-occurrence features with per-fold quantizer fits.

    The quantizer range is refitted on each fold's training volumes and the
    whole feature set recomputed under it, so no test information leaks into
    the gray-level binning. In 2-D mode the volumes are time-collapsed
    first; the identical offset set then degenerates to its in-plane
    directions.
    """
    if mode == "glcm2d":
        volumes = [collapse_time(v) for v in volumes]
    labels = [v.label for v in volumes]
    offsets = standard_offsets(cfg.distances)
    folds = stratified_folds(labels, cfg.folds, fold_seed)
    n = len(volumes)
    label_order = tuple(sorted(set(labels)))
    total = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    per_fold = []
    quantizers = []
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        train_idx = np.flatnonzero(mask)
        quantizer = fit_quantizer([volumes[i] for i in train_idx], cfg.num_levels)
        quantizers.append((quantizer.lo, quantizer.hi))
        ds = _glcm_dataset(volumes, quantizer, cfg, offsets)
        result = holdout_evaluate(
            ds.subset(train_idx), ds.subset(fold), cfg.knn_k, cfg.standardize
        )
        per_fold.append(result.accuracy)
        total += result.confusion.counts
    accuracy = float(np.trace(total) / total.sum())
    return GlcmCvResult(
        result=CvResult(
            accuracy=accuracy,
            confusion=ConfusionMatrix(counts=total, labels=label_order),
            per_fold=tuple(per_fold),
            standardized=cfg.standardize,
        ),
        quantizer_ranges=tuple(quantizers),
    )


def _cv_payload(outcome) -> dict:
    """Serialize a CvResult or GlcmCvResult block for the report payload."""
    quantizers = None
    result = outcome
    if isinstance(outcome, GlcmCvResult):
        quantizers = outcome.quantizer_ranges
        result = outcome.result
    doc = {
        "accuracy": round(result.accuracy, 12),
        "per_fold": [round(a, 12) for a in result.per_fold],
        "confusion": result.confusion.counts.tolist(),
        "labels": list(result.confusion.labels),
        "standardized": result.standardized,
    }
    if quantizers is not None:
        doc["quantizer_ranges"] = [
            [lo, round(hi, 12)] for lo, hi in quantizers
        ]
    return doc


def _taxel_cv(arrays, cfg, fold_seed):
    ds, undefined = single_taxel_dataset(arrays, cfg)
    result = cross_validate(ds, cfg.knn_k, cfg.folds, fold_seed, cfg.standardize)
    return result, undefined


def _change_pct(reference: float, improved: float) -> float:
    if reference == 0:
        return float("inf")
    return round((improved - reference) / reference * 100.0, 12)


def run_accuracy_comparison(cfg: ExperimentConfig, corpus=None) -> dict:
    """Single-taxel vs 3-D co-occurrence accuracy per sliding velocity.

    Also sweeps the neighbour count over ``cfg.knn_k_sweep`` to document
    robustness of the comparison to k.
    """
    corpus = corpus if corpus is not None else build_corpus(cfg)
    per_velocity = []
    k_sweep = []
    for velocity in cfg.corpus.velocities:
        arrays = corpus[velocity]
        fold_seed = derive_seed(cfg.master_seed, "folds", _velocity_key(velocity))
        taxel, undefined = _taxel_cv(arrays, cfg, fold_seed)
        volumes = build_volumes(arrays, cfg)
        glcm3d = glcm_cross_validate(volumes, cfg, fold_seed, "glcm3d")
        per_velocity.append(
            {
                "velocity_mm_s": velocity,
                "single_taxel": _cv_payload(taxel),
                "glcm3d": _cv_payload(glcm3d),
                "change_pct": _change_pct(taxel.accuracy, glcm3d.accuracy),
                "undefined_taxel_stats": undefined,
            }
        )
        taxel_ds, _ = single_taxel_dataset(arrays, cfg)
        for k in cfg.knn_k_sweep:
            k_cfg = dataclasses.replace(cfg, knn_k=int(k))
            taxel_k = cross_validate(
                taxel_ds, int(k), cfg.folds, fold_seed, cfg.standardize
            )
            glcm_k = glcm_cross_validate(volumes, k_cfg, fold_seed, "glcm3d")
            k_sweep.append(
                {
                    "velocity_mm_s": velocity,
                    "k": int(k),
                    "single_taxel_accuracy": round(taxel_k.accuracy, 12),
                    "glcm3d_accuracy": round(glcm_k.accuracy, 12),
                }
            )
    return {
        "experiment": "accuracy_comparison",
        "config": cfg.to_json_dict(),
        "per_velocity": per_velocity,
        "k_sweep": k_sweep,
    }


def run_perturbation_study(
    cfg: ExperimentConfig,
    corpus=None,
    n_values: Optional[Sequence[int]] = None,
    repeats: Optional[int] = None,
) -> dict:
    """Accuracy under random spatial reassignment of n taxels.

    Each of the ``repeats`` draws perturbs every trial independently (one
    derangement per trial, seeded from the draw) and cross-validates the
    perturbed corpus; reported accuracy per n is the mean over draws. n = 0
    rows are the unperturbed baseline.
    """
    corpus = corpus if corpus is not None else build_corpus(
        cfg, [cfg.perturb_velocity]
    )
    n_values = tuple(n_values if n_values is not None else cfg.perturb_n_values)
    repeats = repeats if repeats is not None else cfg.perturb_repeats
    velocity = cfg.perturb_velocity
    arrays = corpus[velocity]
    fold_seed = derive_seed(cfg.master_seed, "folds", _velocity_key(velocity))
    taxel, _ = _taxel_cv(arrays, cfg, fold_seed)
    baseline = glcm_cross_validate(build_volumes(arrays, cfg), cfg, fold_seed)
    rows = []
    for n in n_values:
        if n == 0:
            rows.append(
                {
                    "n_perturbed": 0,
                    "mean_accuracy": round(baseline.accuracy, 12),
                    "accuracies": [round(baseline.accuracy, 12)],
                }
            )
            continue
        accs = []
        for rep in range(repeats):
            perturbed = [
                perturb_spatial(
                    arr, n, derive_seed(cfg.master_seed, "perturb", n, rep, i)
                )
                for i, arr in enumerate(arrays)
            ]
            result = glcm_cross_validate(
                build_volumes(perturbed, cfg), cfg, fold_seed
            )
            accs.append(round(result.accuracy, 12))
        rows.append(
            {
                "n_perturbed": int(n),
                "mean_accuracy": round(float(np.mean(accs)), 12),
                "accuracies": accs,
            }
        )
    return {
        "experiment": "perturbation",
        "config": cfg.to_json_dict(),
        "velocity_mm_s": velocity,
        "repeats": repeats,
        "baseline_glcm3d": _cv_payload(baseline),
        "single_taxel_reference": _cv_payload(taxel),
        "rows": rows,
    }


def run_temporal_collapse_study(cfg: ExperimentConfig, corpus=None) -> dict:
    """Three-way accuracy (single-taxel, time-collapsed 2-D, full 3-D)."""
    corpus = corpus if corpus is not None else build_corpus(cfg)
    per_velocity = []
    for velocity in cfg.corpus.velocities:
        arrays = corpus[velocity]
        fold_seed = derive_seed(cfg.master_seed, "folds", _velocity_key(velocity))
        taxel, _ = _taxel_cv(arrays, cfg, fold_seed)
        volumes = build_volumes(arrays, cfg)
        glcm2d = glcm_cross_validate(volumes, cfg, fold_seed, "glcm2d")
        glcm3d = glcm_cross_validate(volumes, cfg, fold_seed, "glcm3d")
        per_velocity.append(
            {
                "velocity_mm_s": velocity,
                "single_taxel": _cv_payload(taxel),
                "glcm2d": _cv_payload(glcm2d),
                "glcm3d": _cv_payload(glcm3d),
            }
        )
    return {
        "experiment": "temporal_collapse",
        "config": cfg.to_json_dict(),
        "per_velocity": per_velocity,
    }


def run_tor_study(
    cfg: ExperimentConfig,
    corpus=None,
    fractions: Optional[Sequence[float]] = None,
) -> dict:
    """Recognition time: 3-D accuracy on truncated volumes vs full-signal
    single-taxel reference; reports the smallest sufficient fraction."""
    corpus = corpus if corpus is not None else build_corpus(cfg)
    fractions = tuple(fractions if fractions is not None else cfg.tor_fractions)
    per_velocity = []
    for velocity in cfg.corpus.velocities:
        arrays = corpus[velocity]
        fold_seed = derive_seed(cfg.master_seed, "folds", _velocity_key(velocity))
        taxel, _ = _taxel_cv(arrays, cfg, fold_seed)
        volumes = build_volumes(arrays, cfg)
        rows = []
        min_sufficient = None
        for fraction in fractions:
            truncated = [truncate_time(v, fraction) for v in volumes]
            result = glcm_cross_validate(truncated, cfg, fold_seed)
            rows.append(
                {
                    "fraction": fraction,
                    "accuracy": round(result.accuracy, 12),
                }
            )
            if result.accuracy >= taxel.accuracy and (
                min_sufficient is None or fraction < min_sufficient
            ):
                min_sufficient = fraction
        per_velocity.append(
            {
                "velocity_mm_s": velocity,
                "single_taxel_reference": round(taxel.accuracy, 12),
                "rows": rows,
                "min_sufficient_fraction": min_sufficient,
            }
        )
    return {
        "experiment": "time_to_recognition",
        "config": cfg.to_json_dict(),
        "per_velocity": per_velocity,
    }


def run_velocity_invariance_study(cfg: ExperimentConfig, corpus=None) -> dict:
    """Train on two velocities, test on the held-out one; fixed split.

    The quantizer and standardization statistics are fitted on the training
    velocities only.
    """
    corpus = corpus if corpus is not None else build_corpus(cfg)
    if len(cfg.corpus.velocities) < 3:
        raise ValueError("velocity invariance needs at least three velocities")
    all_arrays = [a for v in cfg.corpus.velocities for a in corpus[v]]
    taxel_ds, _ = single_taxel_dataset(all_arrays, cfg)
    offsets = standard_offsets(cfg.distances)
    rows = []
    for velocity in cfg.corpus.velocities:
        taxel_train, taxel_test = split_by_velocity(taxel_ds, velocity)
        taxel = holdout_evaluate(
            taxel_train, taxel_test, cfg.knn_k, cfg.standardize
        )
        train_vols = [
            build_volume(a, cfg.bin_s)
            for v in cfg.corpus.velocities
            if v != velocity
            for a in corpus[v]
        ]
        test_vols = [build_volume(a, cfg.bin_s) for a in corpus[velocity]]
        quantizer = fit_quantizer(train_vols, cfg.num_levels)
        train_ds = _glcm_dataset(train_vols, quantizer, cfg, offsets)
        test_ds = _glcm_dataset(test_vols, quantizer, cfg, offsets)
        glcm3d = holdout_evaluate(train_ds, test_ds, cfg.knn_k, cfg.standardize)
        glcm_block = _cv_payload(glcm3d)
        glcm_block["quantizer_range"] = [quantizer.lo, round(quantizer.hi, 12)]
        rows.append(
            {
                "test_velocity_mm_s": velocity,
                "single_taxel": _cv_payload(taxel),
                "glcm3d": glcm_block,
                "change_pct": _change_pct(taxel.accuracy, glcm3d.accuracy),
            }
        )
    return {
        "experiment": "velocity_invariance",
        "config": cfg.to_json_dict(),
        "rows": rows,
    }


def run_gain_sweep(
    cfg: ExperimentConfig, gains: Optional[Sequence[float]] = None
) -> dict:
    """Pooled ISI histograms per gain and stimulus, for gain selection."""
    gains = tuple(gains if gains is not None else cfg.gain_sweep_gains)
    velocity = cfg.gain_sweep_velocity
    histograms = []
    for label in cfg.corpus.labels:
        traces = [
            _generate_trial(cfg, label, velocity, trial)
            for trial in range(cfg.corpus.trials)
        ]
        histograms.extend(
            isi_histogram_sweep(traces, gains, cfg.neuron, cfg.isi_bin_width_s)
        )
    rows = [
        {
            "gain": h.gain,
            "label": h.label,
            "empty": h.empty,
            "mean_isi_s": None if h.empty else round(h.mean_isi_s, 12),
            "bin_edges_s": [round(float(e), 12) for e in h.bin_edges],
            "counts": h.counts.tolist(),
        }
        for h in histograms
    ]
    return {
        "experiment": "gain_sweep",
        "config": cfg.to_json_dict(),
        "velocity_mm_s": velocity,
        "bin_width_s": cfg.isi_bin_width_s,
        "histograms": rows,
    }


_RUNNERS = {
    "accuracy": run_accuracy_comparison,
    "perturbation": run_perturbation_study,
    "collapse": run_temporal_collapse_study,
    "tor": run_tor_study,
    "velocity": run_velocity_invariance_study,
}


def run_experiment(name: str, cfg: ExperimentConfig, corpus=None) -> dict:
    """Run one named experiment; see EXPERIMENT_NAMES."""
    if name == "gains":
        return run_gain_sweep(cfg)
    if name not in _RUNNERS:
        raise ValueError(
            f"unknown experiment {name!r}; expected one of {EXPERIMENT_NAMES}"
        )
    return _RUNNERS[name](cfg, corpus)


def run_all(cfg: ExperimentConfig) -> dict[str, dict]:
    """Run every experiment, reusing one encoded corpus."""
    corpus = build_corpus(cfg)
    results = {}
    for name in ("accuracy", "perturbation", "collapse", "tor", "velocity"):
        results[name] = _RUNNERS[name](cfg, corpus)
    results["gains"] = run_gain_sweep(cfg)
    return results


def payload_json(payload: dict) -> str:
    """Canonical JSON form of a result payload (deterministic bytes)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_report(payload: dict, out_dir, name: str) -> str:
    """Write <name>.json ({payload, meta}) plus a flat <name>.csv table.

    The payload block is deterministic; volatile values (timestamps) are
    confined to the meta block.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{name}.json")
    doc = (
        '{"payload":'
        + payload_json(payload)
        + ',"meta":'
        + json.dumps(
            {
                "created_unix_s": time.time(),
                "tactex_version": __version__,
            },
            sort_keys=True,
        )
        + "}"
    )
    with open(json_path, "w") as fh:
        fh.write(doc + "\n")
    csv_path = os.path.join(out_dir, f"{name}.csv")
    rows = _payload_table(payload)
    with open(csv_path, "w") as fh:
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    return json_path


def _payload_table(payload: dict) -> list[list]:
    """Flatten an experiment payload into its headline CSV table."""
    kind = payload.get("experiment")
    if kind == "accuracy_comparison":
        rows = [["velocity_mm_s", "single_taxel", "glcm3d", "change_pct"]]
        for entry in payload["per_velocity"]:
            rows.append(
                [
                    entry["velocity_mm_s"],
                    entry["single_taxel"]["accuracy"],
                    entry["glcm3d"]["accuracy"],
                    entry["change_pct"],
                ]
            )
        return rows
    if kind == "perturbation":
        rows = [["n_perturbed", "mean_accuracy", "single_taxel_reference"]]
        ref = payload["single_taxel_reference"]["accuracy"]
        for entry in payload["rows"]:
            rows.append([entry["n_perturbed"], entry["mean_accuracy"], ref])
        return rows
    if kind == "temporal_collapse":
        rows = [["velocity_mm_s", "single_taxel", "glcm2d", "glcm3d"]]
        for entry in payload["per_velocity"]:
            rows.append(
                [
                    entry["velocity_mm_s"],
                    entry["single_taxel"]["accuracy"],
                    entry["glcm2d"]["accuracy"],
                    entry["glcm3d"]["accuracy"],
                ]
            )
        return rows
    if kind == "time_to_recognition":
        rows = [["velocity_mm_s", "fraction", "accuracy", "single_taxel_reference"]]
        for entry in payload["per_velocity"]:
            for r in entry["rows"]:
                rows.append(
                    [
                        entry["velocity_mm_s"],
                        r["fraction"],
                        r["accuracy"],
                        entry["single_taxel_reference"],
                    ]
                )
        return rows
    if kind == "velocity_invariance":
        rows = [["test_velocity_mm_s", "single_taxel", "glcm3d", "change_pct"]]
        for entry in payload["rows"]:
            rows.append(
                [
                    entry["test_velocity_mm_s"],
                    entry["single_taxel"]["accuracy"],
                    entry["glcm3d"]["accuracy"],
                    entry["change_pct"],
                ]
            )
        return rows
    if kind == "gain_sweep":
        rows = [["gain", "label", "mean_isi_s", "total_intervals"]]
        for h in payload["histograms"]:
            rows.append(
                [
                    h["gain"],
                    h["label"],
                    "" if h["mean_isi_s"] is None else h["mean_isi_s"],
                    sum(h["counts"]),
                ]
            )
        return rows
    return [["key", "value"], ["experiment", kind]]
