"""Batch command-line interface.

Subcommands cover the pipeline stages (generate, encode, features,
classify) and the experiment harness. On failure every command prints a
machine-readable error JSON to stderr and exits nonzero.
"""

from __future__ import annotations

import dataclasses
import glob
import json
import os
import sys

import click
import numpy as np

from . import __version__
from .classify import Dataset, cross_validate, holdout_evaluate, split_by_velocity
from .config import ExperimentConfig, default_config, derive_seed, load_config
from .glcm import FEATURE_NAMES, glcm_features, standard_offsets
from .harness import (
    EXPERIMENT_NAMES,
    SINGLE_TAXEL_FEATURE_NAMES,
    run_all,
    run_experiment,
    write_report,
)
from .neuron import SpikeArray, SpikeTrain, encode_array
from .spikestats import single_taxel_features
from .traces import GridGeometry, generate_trace, load_trace, preprocess, save_trace
from .volume import build_volume, fit_quantizer


def _fail(exc: BaseException) -> None:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(doc), err=True)
    sys.exit(1)


def _load_cfg(config_path) -> ExperimentConfig:
    return load_config(config_path) if config_path else default_config()


@click.group()
@click.version_option(version=__version__)
def main():
    """Spiking tactile texture classification toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--velocity", "velocities", type=float, multiple=True)
def generate(config_path, out_dir, velocities):
    """Write the synthetic trace corpus as CSV files plus a manifest."""
    try:
        cfg = _load_cfg(config_path)
        os.makedirs(out_dir, exist_ok=True)
        vels = list(velocities) or list(cfg.corpus.velocities)
        manifest = {"synthetic": True, "files": [], "master_seed": cfg.master_seed}
        for velocity in vels:
            for label in cfg.corpus.labels:
                texture = cfg.corpus.textures[label]
                for trial in range(cfg.corpus.trials):
                    seed = derive_seed(
                        cfg.master_seed,
                        "trace",
                        label,
                        int(round(velocity * 1000)),
                        trial,
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
                    fname = f"{label}_v{velocity:g}_t{trial:02d}.csv"
                    save_trace(trace, os.path.join(out_dir, fname))
                    manifest["files"].append(fname)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        click.echo(f"wrote {len(manifest['files'])} traces to {out_dir}")
    except Exception as exc:
        _fail(exc)


def _save_spikes(arr: SpikeArray, path: str) -> None:
    g = arr.geometry
    with open(path, "w") as fh:
        fh.write(
            f"# duration_s={arr.duration_s!r} label={arr.label} "
            f"velocity_mm_s={arr.velocity_mm_s!r} trial={arr.trial_id} "
            f"rows={g.rows} cols={g.cols}\n"
        )
        fh.write("taxel_id,spike_time_s\n")
        for idx, train in enumerate(arr.trains):
            for t in train.spike_times_s.tolist():
                fh.write(f"{idx},{t!r}\n")


def _load_spikes(path: str) -> SpikeArray:
    meta = {}
    per_taxel: dict[int, list[float]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, value = tok.partition("=")
                    meta[key] = value
                continue
            if line.startswith("taxel_id"):
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise ValueError(f"{path}:{lineno}: expected taxel_id,spike_time_s")
            per_taxel.setdefault(int(cells[0]), []).append(float(cells[1]))
    geometry = GridGeometry(rows=int(meta["rows"]), cols=int(meta["cols"]))
    duration = float(meta["duration_s"])
    trains = tuple(
        SpikeTrain(np.asarray(sorted(per_taxel.get(i, []))), duration)
        for i in range(geometry.num_taxels)
    )
    return SpikeArray(
        trains=trains,
        geometry=geometry,
        label=meta.get("label", ""),
        velocity_mm_s=float(meta.get("velocity_mm_s", 0.0)),
        trial_id=int(meta.get("trial", 0)),
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--traces", "traces_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def encode(config_path, traces_dir, out_dir):
    """Preprocess trace CSVs and encode them into spike CSVs."""
    try:
        cfg = _load_cfg(config_path)
        os.makedirs(out_dir, exist_ok=True)
        paths = sorted(glob.glob(os.path.join(traces_dir, "*.csv")))
        if not paths:
            raise ValueError(f"no trace CSVs found in {traces_dir}")
        for path in paths:
            trace = preprocess(load_trace(path), cfg.cutoff_hz)
            arr = encode_array(trace, cfg.neuron)
            out_name = os.path.splitext(os.path.basename(path))[0] + ".spikes.csv"
            _save_spikes(arr, os.path.join(out_dir, out_name))
        click.echo(f"encoded {len(paths)} traces to {out_dir}")
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--spikes", "spikes_dir", type=click.Path(exists=True), required=True)
@click.option(
    "--mode",
    type=click.Choice(["taxel", "glcm2d", "glcm3d"]),
    default="glcm3d",
    show_default=True,
)
@click.option("--out", "out_path", type=click.Path(), required=True)
def features(config_path, spikes_dir, mode, out_path):
    """Extract feature CSV rows from spike CSVs.

    Co-occurrence modes fit the gray-level quantizer on this whole input
    set; for leakage-free train/test evaluation use the experiment
    commands, which refit per training split.
    """
    try:
        cfg = _load_cfg(config_path)
        paths = sorted(glob.glob(os.path.join(spikes_dir, "*.csv")))
        if not paths:
            raise ValueError(f"no spike CSVs found in {spikes_dir}")
        arrays = [_load_spikes(p) for p in paths]
        lines = []
        if mode == "taxel":
            lines.append("label,velocity,trial,taxel,msr,cv_isi,fano,defined_flags")
            taxel_index = cfg.taxel_row * cfg.corpus.geometry.cols + cfg.taxel_col
            for arr in arrays:
                feats = single_taxel_features(
                    arr.trains[taxel_index],
                    taxel_index=taxel_index,
                    window_s=cfg.fano_window_s,
                )
                flags = f"{int(feats.cv_defined)}{int(feats.fano_defined)}"
                lines.append(
                    f"{arr.label},{arr.velocity_mm_s:g},{arr.trial_id},"
                    f"{taxel_index},{feats.msr_hz!r},{feats.cv_isi!r},"
                    f"{feats.fano!r},{flags}"
                )
        else:
            volumes = [build_volume(a, cfg.bin_s) for a in arrays]
            quantizer = fit_quantizer(volumes, cfg.num_levels)
            offsets = standard_offsets(cfg.distances)
            lines.append("label,velocity,trial,mode,contrast,correlation,asm")
            for arr, vol in zip(arrays, volumes):
                vec = glcm_features(vol, mode, quantizer, cfg.num_levels, offsets)
                contrast, correlation, asm = (float(v) for v in vec)
                lines.append(
                    f"{arr.label},{arr.velocity_mm_s:g},{arr.trial_id},{mode},"
                    f"{contrast!r},{correlation!r},{asm!r}"
                )
        with open(out_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        click.echo(f"wrote {len(lines) - 1} feature rows to {out_path}")
    except Exception as exc:
        _fail(exc)


def _load_feature_csv(path: str) -> tuple[Dataset, str]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    if header[:3] != ["label", "velocity", "trial"]:
        raise ValueError("feature CSV must start with label,velocity,trial columns")
    if header[3] == "taxel":
        feature_cols, names = (4, 5, 6), SINGLE_TAXEL_FEATURE_NAMES
        approach = "single_taxel"
    elif header[3] == "mode":
        feature_cols, names = (4, 5, 6), FEATURE_NAMES
        approach = ""
    else:
        raise ValueError("unrecognized feature CSV header")
    rows, labels, velocities, trials = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        labels.append(cells[0])
        velocities.append(float(cells[1]))
        trials.append(int(cells[2]))
        if not approach:
            approach = cells[3]
        rows.append([float(cells[i]) for i in feature_cols])
    ds = Dataset(
        features=np.asarray(rows),
        labels=labels,
        velocities=velocities,
        trials=trials,
        feature_names=names,
    )
    return ds, approach


@main.command(name="classify")
@click.option("--features", "features_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--standardize/--no-standardize", default=True, show_default=True)
@click.option(
    "--test-velocity",
    type=float,
    default=None,
    help="Hold out one velocity for testing instead of cross-validating.",
)
def classify_cmd(features_path, out_path, k, folds, seed, standardize, test_velocity):
    """Classify a feature CSV and write a results JSON (+ confusion CSV)."""
    try:
        ds, approach = _load_feature_csv(features_path)
        if test_velocity is None:
            result = cross_validate(ds, k, folds, seed, standardize)
            policy = "stratified_cv"
        else:
            train, test = split_by_velocity(ds, test_velocity)
            result = holdout_evaluate(train, test, k, standardize)
            policy = f"holdout_velocity={test_velocity:g}"
        doc = {
            "approach": approach,
            "velocity_policy": policy,
            "k": k,
            "folds": folds if test_velocity is None else 1,
            "seed": seed,
            "accuracy": result.accuracy,
            "per_fold": list(result.per_fold),
            "confusion": result.confusion.counts.tolist(),
            "labels": list(result.confusion.labels),
            "standardized": result.standardized,
        }
        with open(out_path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        conf_path = os.path.splitext(out_path)[0] + ".confusion.csv"
        with open(conf_path, "w") as fh:
            fh.write("true\\pred," + ",".join(result.confusion.labels) + "\n")
            for lab, row in zip(result.confusion.labels, result.confusion.counts):
                fh.write(lab + "," + ",".join(str(c) for c in row) + "\n")
        click.echo(f"accuracy {result.accuracy:.4f} -> {out_path}")
    except Exception as exc:
        _fail(exc)


@main.command()
@click.argument("name", type=click.Choice(EXPERIMENT_NAMES + ("all",)))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--emit-plots", is_flag=True, default=False)
def experiment(name, config_path, seed, out_dir, emit_plots):
    """Run one named experiment (or all) and write reports into OUT."""
    try:
        cfg = _load_cfg(config_path)
        if seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=seed)
        if name == "all":
            results = run_all(cfg)
        else:
            results = {name: run_experiment(name, cfg)}
        for exp_name, payload in results.items():
            path = write_report(payload, out_dir, exp_name)
            click.echo(f"wrote {path}")
        if emit_plots:
            from .plots import render_all

            for png in render_all(out_dir, list(results)):
                click.echo(f"wrote {png}")
    except Exception as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
