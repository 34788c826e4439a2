"""Experiment configuration: JSON schema, defaults, and seed derivation.

A single JSON document drives every experiment. All randomness descends from
one master seed through a documented derivation: each consumer builds a seed
sequence from the master seed plus a path of string/integer components
(strings hashed with crc32), so experiments are individually rerunnable and
insensitive to execution order.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .neuron import NeuronParams
from .traces import GridGeometry, TextureParams

__all__ = [
    "CorpusSpec",
    "ExperimentConfig",
    "derive_seed",
    "derive_rng",
    "parse_config",
    "load_config",
    "default_config",
]


def _seed_path(master_seed: int, path: Sequence) -> list[int]:
    parts = [int(master_seed) & 0xFFFFFFFF]
    for item in path:
        if isinstance(item, str):
            parts.append(zlib.crc32(item.encode("utf-8")))
        elif isinstance(item, (int, np.integer)):
            parts.append(int(item) & 0xFFFFFFFF)
        elif isinstance(item, float) and item.is_integer():
            parts.append(int(item) & 0xFFFFFFFF)
        else:
            parts.append(zlib.crc32(repr(item).encode("utf-8")))
    return parts


def derive_seed(master_seed: int, *path) -> np.random.SeedSequence:
    """Derive a child seed from the master seed and a component path."""
    return np.random.SeedSequence(_seed_path(master_seed, path))


def derive_rng(master_seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *path))


@dataclass(frozen=True)
class CorpusSpec:
    """Synthetic corpus description: textures, velocities, trial counts."""

    textures: dict[str, TextureParams]
    velocities: tuple[float, ...] = (5.0, 10.0, 15.0)
    trials: int = 20
    slide_distance_mm: float = 90.0
    sample_rate_hz: float = 1000.0
    noise_sd: float = 0.05
    geometry: GridGeometry = field(default_factory=GridGeometry)

    def __post_init__(self):
        if not self.textures:
            raise ValueError("corpus needs at least one texture")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.textures))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment run needs, parsed from one JSON document."""

    corpus: CorpusSpec
    neuron: NeuronParams = NeuronParams()
    cutoff_hz: float = 50.0
    bin_s: float = 0.2
    num_levels: int = 8
    distances: tuple[int, ...] = (1, 2, 4, 8)
    knn_k: int = 5
    knn_k_sweep: tuple[int, ...] = (1, 3, 5, 7, 9)
    folds: int = 5
    standardize: bool = True
    taxel_row: int = 0
    taxel_col: int = 0
    fano_window_s: float = 0.5
    perturb_n_values: tuple[int, ...] = (2, 4, 8, 12, 16)
    perturb_repeats: int = 10
    perturb_velocity: float = 5.0
    tor_fractions: tuple[float, ...] = (
        0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
    )
    gain_sweep_gains: tuple[float, ...] = (5.0, 8.0, 12.0, 16.0, 20.0)
    gain_sweep_velocity: float = 5.0
    isi_bin_width_s: float = 0.01
    master_seed: int = 20240901

    def to_json_dict(self) -> dict:
        """Round-trippable plain-dict form (echoed into result payloads)."""
        g = self.corpus.geometry
        return {
            "corpus": {
                "textures": {
                    name: {
                        "spatial_period_mm": t.spatial_period_mm,
                        "amplitude": t.amplitude,
                        "harmonic_weights": list(t.harmonic_weights),
                        "roughness_noise_sd": t.roughness_noise_sd,
                        "baseline": t.baseline,
                        "profile_seed": t.profile_seed,
                    }
                    for name, t in sorted(self.corpus.textures.items())
                },
                "velocities": list(self.corpus.velocities),
                "trials": self.corpus.trials,
                "slide_distance_mm": self.corpus.slide_distance_mm,
                "sample_rate_hz": self.corpus.sample_rate_hz,
                "noise_sd": self.corpus.noise_sd,
                "geometry": {
                    "rows": g.rows,
                    "cols": g.cols,
                    "pitch_mm": g.pitch_mm,
                    "taxel_area_mm2": g.taxel_area_mm2,
                },
            },
            "preprocess": {"cutoff_hz": self.cutoff_hz},
            "neuron": {
                "a": self.neuron.a,
                "b": self.neuron.b,
                "c": self.neuron.c,
                "d": self.neuron.d,
                "v_peak": self.neuron.v_peak,
                "gain": self.neuron.gain,
            },
            "volume": {"bin_s": self.bin_s, "num_levels": self.num_levels},
            "offsets": {"distances": list(self.distances)},
            "knn": {
                "k": self.knn_k,
                "k_sweep": list(self.knn_k_sweep),
                "folds": self.folds,
                "standardize": self.standardize,
            },
            "single_taxel": {
                "row": self.taxel_row,
                "col": self.taxel_col,
                "fano_window_s": self.fano_window_s,
            },
            "experiments": {
                "perturbation": {
                    "n_values": list(self.perturb_n_values),
                    "repeats": self.perturb_repeats,
                    "velocity": self.perturb_velocity,
                },
                "tor": {"fractions": list(self.tor_fractions)},
                "gain_sweep": {
                    "gains": list(self.gain_sweep_gains),
                    "velocity": self.gain_sweep_velocity,
                    "isi_bin_width_s": self.isi_bin_width_s,
                },
            },
            "master_seed": self.master_seed,
        }


def _parse_corpus(doc: dict) -> CorpusSpec:
    textures = {
        name: TextureParams(
            spatial_period_mm=t["spatial_period_mm"],
            amplitude=t["amplitude"],
            harmonic_weights=tuple(t.get("harmonic_weights", (1.0,))),
            roughness_noise_sd=t.get("roughness_noise_sd", 0.0),
            baseline=t.get("baseline", 0.0),
            profile_seed=t.get("profile_seed", 0),
        )
        for name, t in doc["textures"].items()
    }
    geo = doc.get("geometry", {})
    return CorpusSpec(
        textures=textures,
        velocities=tuple(float(v) for v in doc.get("velocities", (5.0, 10.0, 15.0))),
        trials=int(doc.get("trials", 20)),
        slide_distance_mm=float(doc.get("slide_distance_mm", 90.0)),
        sample_rate_hz=float(doc.get("sample_rate_hz", 1000.0)),
        noise_sd=float(doc.get("noise_sd", 0.05)),
        geometry=GridGeometry(
            rows=int(geo.get("rows", 4)),
            cols=int(geo.get("cols", 4)),
            pitch_mm=float(geo.get("pitch_mm", 3.25)),
            taxel_area_mm2=float(geo.get("taxel_area_mm2", 4.0)),
        ),
    )


def parse_config(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document."""
    neuron_doc = doc.get("neuron", {})
    knn_doc = doc.get("knn", {})
    vol_doc = doc.get("volume", {})
    taxel_doc = doc.get("single_taxel", {})
    exp_doc = doc.get("experiments", {})
    perturb = exp_doc.get("perturbation", {})
    tor = exp_doc.get("tor", {})
    gain_sweep = exp_doc.get("gain_sweep", {})
    defaults = ExperimentConfig.__dataclass_fields__
    return ExperimentConfig(
        corpus=_parse_corpus(doc["corpus"]),
        neuron=NeuronParams(
            a=neuron_doc.get("a", 0.02),
            b=neuron_doc.get("b", 0.2),
            c=neuron_doc.get("c", -65.0),
            d=neuron_doc.get("d", 8.0),
            v_peak=neuron_doc.get("v_peak", 30.0),
            gain=neuron_doc.get("gain", 8.0),
        ),
        cutoff_hz=float(doc.get("preprocess", {}).get("cutoff_hz", 50.0)),
        bin_s=float(vol_doc.get("bin_s", 0.2)),
        num_levels=int(vol_doc.get("num_levels", 8)),
        distances=tuple(doc.get("offsets", {}).get("distances", (1, 2, 4, 8))),
        knn_k=int(knn_doc.get("k", 5)),
        knn_k_sweep=tuple(knn_doc.get("k_sweep", (1, 3, 5, 7, 9))),
        folds=int(knn_doc.get("folds", 5)),
        standardize=bool(knn_doc.get("standardize", True)),
        taxel_row=int(taxel_doc.get("row", 0)),
        taxel_col=int(taxel_doc.get("col", 0)),
        fano_window_s=float(taxel_doc.get("fano_window_s", 0.5)),
        perturb_n_values=tuple(perturb.get("n_values", (2, 4, 8, 12, 16))),
        perturb_repeats=int(perturb.get("repeats", 10)),
        perturb_velocity=float(perturb.get("velocity", 5.0)),
        tor_fractions=tuple(
            tor.get("fractions", defaults["tor_fractions"].default)
        ),
        gain_sweep_gains=tuple(
            gain_sweep.get("gains", defaults["gain_sweep_gains"].default)
        ),
        gain_sweep_velocity=float(gain_sweep.get("velocity", 5.0)),
        isi_bin_width_s=float(gain_sweep.get("isi_bin_width_s", 0.01)),
        master_seed=int(doc.get("master_seed", 20240901)),
    )


def load_config(path) -> ExperimentConfig:
    """Load an experiment config from a JSON file."""
    with open(path) as fh:
        return parse_config(json.load(fh))


def default_config() -> ExperimentConfig:
    """The packaged default synthetic-corpus configuration."""
    text = resources.files("tactex.data").joinpath("default_config.json").read_text()
    return parse_config(json.loads(text))
