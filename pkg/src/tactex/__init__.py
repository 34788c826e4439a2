"""tactex: spiking tactile texture classification.

Pipeline: analog sensor traces -> spike trains (regular-spiking neuron
model) -> spatio-temporal response volumes -> gray-level co-occurrence
features -> KNN classification, plus the ablation experiments that probe
where the discriminative information lives (spatial structure, temporal
structure, recognition time, velocity transfer).
"""

__version__ = "0.1.0"

from ._kernels import using_numba
from .classify import (
    ConfusionMatrix,
    CvResult,
    Dataset,
    cross_validate,
    holdout_evaluate,
    knn_predict,
    split_by_velocity,
    stratified_folds,
)
from .config import (
    CorpusSpec,
    ExperimentConfig,
    default_config,
    derive_rng,
    derive_seed,
    load_config,
)
from .glcm import (
    Glcm,
    HaralickFeatures,
    MeanGlcm,
    OffsetVector,
    glcm,
    glcm_features,
    haralick,
    mean_glcm,
    standard_offsets,
)
from .neuron import (
    IsiHistogram,
    NeuronParams,
    SpikeArray,
    SpikeTrain,
    encode,
    encode_array,
    isi_histogram_sweep,
)
from .spikestats import (
    SingleTaxelFeatures,
    cv_isi,
    fano,
    msr,
    psth,
    single_taxel_features,
)
from .traces import (
    GridGeometry,
    SensorTrace,
    TextureParams,
    generate_trace,
    load_trace,
    preprocess,
    save_trace,
)
from .volume import (
    QuantizedVolume,
    Quantizer,
    ResponseVolume,
    build_volume,
    collapse_time,
    fit_quantizer,
    perturb_spatial,
    quantize,
    truncate_time,
)
