"""Sparse Tsetlin Machine: interpretable conjunctive-clause classifiers
trained directly on compressed sparse binary data."""

from .active_literals import ActiveLiteralRecord
from .clauses import ClauseBank, new_bank, presence_mask
from .data import (
    SparseDataset,
    Vocabulary,
    build_vocabulary,
    densify,
    density,
    load_sparse_file,
    ngrams,
    save_sparse_file,
    tokenize,
    vectorize,
)
from .dense import (
    DenseCoalescedOracle,
    dense_evaluate,
    dense_predict_binary,
    dense_votes,
    import_sparse,
    unit_step,
)
from .engine import (
    EpochMetrics,
    StmModel,
    TrainConfig,
    VoteVector,
    confusion_matrix,
    evaluate_accuracy,
    predict,
    route_feedback,
    sample_negative_class,
    train_epoch,
    train_sample,
    type_ia_feedback,
    type_ib_feedback,
    type_ii_feedback,
    update_probability,
    votes,
)
from .errors import (
    ConfigError,
    DataFormatError,
    InvariantError,
    ModelFormatError,
    StmError,
)
from .model_io import (
    MODEL_FORMAT_VERSION,
    Rule,
    export_rules,
    load_model,
    model_memory_bound,
    model_memory_bytes,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveLiteralRecord",
    "ClauseBank",
    "ConfigError",
    "DataFormatError",
    "DenseCoalescedOracle",
    "EpochMetrics",
    "InvariantError",
    "MODEL_FORMAT_VERSION",
    "ModelFormatError",
    "Rule",
    "SparseDataset",
    "StmError",
    "StmModel",
    "TrainConfig",
    "Vocabulary",
    "VoteVector",
    "build_vocabulary",
    "confusion_matrix",
    "dense_evaluate",
    "dense_predict_binary",
    "dense_votes",
    "densify",
    "density",
    "evaluate_accuracy",
    "export_rules",
    "import_sparse",
    "load_model",
    "load_sparse_file",
    "model_memory_bound",
    "model_memory_bytes",
    "new_bank",
    "ngrams",
    "predict",
    "presence_mask",
    "route_feedback",
    "sample_negative_class",
    "save_model",
    "save_sparse_file",
    "tokenize",
    "train_epoch",
    "train_sample",
    "type_ia_feedback",
    "type_ib_feedback",
    "type_ii_feedback",
    "unit_step",
    "update_probability",
    "vectorize",
    "votes",
]
