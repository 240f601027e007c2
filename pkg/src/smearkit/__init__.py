"""Blood-smear classification toolkit: splits, augmentation, ensembling.

The package covers the verifiable core of a leukemia image-classification
pipeline without the heavyweight CNNs: deterministic stratified dataset
splitting, seedable image augmentation, an interchange format for per-model
class-probability matrices, probability-sum ensembling, a full multiclass
metric engine, and a small dense classifier exercising the same training
controls (Adam/SGD/RMSProp, cross-entropy, dropout, early stopping).

Everything is reproducible from explicit seeds through one documented
counter-based generator; see :mod:`smearkit.rng`.
"""

from .errors import DataError, NumericError, SmearkitError
from .rng import SplitMix64, derive_seed
from .dataset import (
    DatasetManifest,
    SplitAssignment,
    load_manifest,
    split_indices,
    split_sizes,
    split_summary,
    stratified_split,
)
from .augment import (
    AugmentSpec,
    AugmentStep,
    apply_pipeline,
    parse_augment_spec,
    serialize_augment_spec,
)
from .predict_io import (
    ModelBundle,
    ProbabilityMatrix,
    assemble_bundle,
    parse_probability_file,
    parse_probability_text,
    serialize_probability_matrix,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleResult,
    majority_vote,
    run_ensemble,
    sum_of_probabilities,
    weighted_sum,
)
from .metrics import (
    ConfusionMatrix,
    MetricReport,
    accuracy,
    build_confusion,
    full_report,
    report_from_confusion,
)
from .trainer import (
    Adam,
    EarlyStopState,
    FitResult,
    ModelParams,
    NetworkSpec,
    RMSProp,
    SGDMomentum,
    TrainingConfig,
    export_predictions,
    fit,
    forward,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AugmentSpec",
    "AugmentStep",
    "ConfusionMatrix",
    "DataError",
    "DatasetManifest",
    "EarlyStopState",
    "EnsembleConfig",
    "EnsembleResult",
    "FitResult",
    "MetricReport",
    "ModelBundle",
    "ModelParams",
    "NetworkSpec",
    "NumericError",
    "ProbabilityMatrix",
    "RMSProp",
    "SGDMomentum",
    "SmearkitError",
    "SplitAssignment",
    "SplitMix64",
    "TrainingConfig",
    "accuracy",
    "apply_pipeline",
    "assemble_bundle",
    "build_confusion",
    "derive_seed",
    "export_predictions",
    "fit",
    "forward",
    "full_report",
    "load_manifest",
    "majority_vote",
    "parse_augment_spec",
    "parse_probability_file",
    "parse_probability_text",
    "report_from_confusion",
    "run_ensemble",
    "serialize_augment_spec",
    "serialize_probability_matrix",
    "split_indices",
    "split_sizes",
    "split_summary",
    "stratified_split",
    "sum_of_probabilities",
    "weighted_sum",
]
