"""Sequence spectrum embeddings and memory-accelerated classifier training.

The package turns biological sequences into fixed-width count vectors
(k-mer, minimizer and spaced-seed spectra), trains a linear soft-max
classifier whose update blends in the direction of recent weight history,
and ships a deterministic CLI around both with replayable run manifests.
"""

from .errors import (
    DegenerateSumError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyInputError,
    FormatError,
    HeaderWithoutSequenceError,
    IllegalResidueError,
    InvalidParameterError,
    NoLabeledRecordsError,
    NonFiniteWeightsError,
    SeqAccelError,
    SequenceTooShortError,
    UnknownLabelError,
)
from .seq_io import (
    AMINO_ALPHABET,
    NUCLEOTIDE_ALPHABET,
    Alphabet,
    Dataset,
    LabeledSequence,
    attach_labels,
    one_hot,
    one_hot_matrix,
    parse_fasta,
    parse_labels,
    resolve_alphabet,
    synth_dataset,
)
from .embed import (
    METHOD_KMER,
    METHOD_MINIMIZER,
    METHOD_SPACED,
    FeatureMatrix,
    PcaModel,
    SpectrumConfig,
    apply_pca,
    embed_dataset,
    embed_sequences,
    fit_pca,
    kmer_spectrum,
    minimizer_spectrum,
    spaced_spectrum,
)
from .trainer import (
    AlphaSweepResult,
    ModelState,
    TrainConfig,
    TrainingTrace,
    aa_update,
    alpha_sweep,
    batch_gradient,
    cross_entropy,
    init_weights,
    normalize_prediction,
    predict_scores,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SeqAccelError",
    "EmptyInputError",
    "IllegalResidueError",
    "HeaderWithoutSequenceError",
    "NoLabeledRecordsError",
    "DuplicateIdError",
    "UnknownLabelError",
    "InvalidParameterError",
    "SequenceTooShortError",
    "DimensionMismatchError",
    "FormatError",
    "DegenerateSumError",
    "NonFiniteWeightsError",
    "Alphabet",
    "AMINO_ALPHABET",
    "NUCLEOTIDE_ALPHABET",
    "LabeledSequence",
    "Dataset",
    "parse_fasta",
    "parse_labels",
    "attach_labels",
    "resolve_alphabet",
    "synth_dataset",
    "one_hot",
    "one_hot_matrix",
    "METHOD_KMER",
    "METHOD_MINIMIZER",
    "METHOD_SPACED",
    "SpectrumConfig",
    "FeatureMatrix",
    "PcaModel",
    "kmer_spectrum",
    "minimizer_spectrum",
    "spaced_spectrum",
    "fit_pca",
    "apply_pca",
    "embed_sequences",
    "embed_dataset",
    "TrainConfig",
    "TrainingTrace",
    "ModelState",
    "AlphaSweepResult",
    "init_weights",
    "predict_scores",
    "normalize_prediction",
    "cross_entropy",
    "batch_gradient",
    "aa_update",
    "train",
    "alpha_sweep",
]
