"""Spoofing-aware speaker verification back-end toolkit.

Scores trials that pair an enrolled speaker with a test utterance by
combining a speaker-verification branch and a spoofing countermeasure
branch through an integrated 2x2 score-matrix head (plus its ablation
variants), with two-stage training, score-level fusion, and the
three-EER / min t-DCF evaluation protocol.
"""

from .cm import CountermeasureClassifier, assist_transform
from .embeddings import EmbeddingStore, read_embedding_store, write_embedding_store
from .exceptions import SasvError
from .heads import (
    AttentionHead,
    ConcatHead,
    ConvHead,
    DiagZeroScoringHead,
    MatrixScoringHead,
    ProbProductHead,
    ScoreSumHead,
    STRATEGIES,
    attention_gate,
    concat_score,
    conv_score,
    make_head,
)
from .losses import (
    aam_softmax_loss,
    finite_diff_gradient,
    orthogonality_penalty,
    weighted_bce,
)
from .matrix import (
    JMatrix,
    ProbMatrix,
    ScoreMatrix,
    cm_score,
    cosine_score,
    diag_zero_score,
    j_matrix,
    matrix_linear_score,
    prob_matrix,
    prob_product_score,
    score_matrix,
    score_sum,
    sigmoid,
)
from .metrics import (
    ASVSPOOF2019_LA_COSTS,
    CostModel,
    EvalReport,
    compute_eer,
    det_points,
    evaluate,
    min_tdcf,
    partition_scores,
)
from .model_io import load_model, save_model
from .optim import HyperParams, TrainReport
from .pipeline import (
    branch_scores,
    cm_training_set,
    features_for_trials,
    score_trials,
    train_system,
    trial_targets,
)
from .scores import ScoreRecord, fuse_scores, read_scores, write_scores
from .synth import Corpus, SynthConfig, generate_corpus, generate_corpus_with_truth
from .trials import (
    TrialLabel,
    TrialRecord,
    build_enrollment,
    parse_enrollment_map,
    parse_trials,
    read_enrollment_map,
    read_trials,
    serialize_trials,
    write_trials,
)
from .validation import l2_normalize

__version__ = "0.1.0"

__all__ = [
    "ASVSPOOF2019_LA_COSTS",
    "AttentionHead",
    "ConcatHead",
    "ConvHead",
    "Corpus",
    "CostModel",
    "CountermeasureClassifier",
    "DiagZeroScoringHead",
    "EmbeddingStore",
    "EvalReport",
    "HyperParams",
    "JMatrix",
    "MatrixScoringHead",
    "ProbMatrix",
    "ProbProductHead",
    "STRATEGIES",
    "SasvError",
    "ScoreMatrix",
    "ScoreRecord",
    "ScoreSumHead",
    "SynthConfig",
    "TrainReport",
    "TrialLabel",
    "TrialRecord",
    "aam_softmax_loss",
    "assist_transform",
    "attention_gate",
    "branch_scores",
    "build_enrollment",
    "cm_score",
    "cm_training_set",
    "compute_eer",
    "concat_score",
    "conv_score",
    "cosine_score",
    "det_points",
    "diag_zero_score",
    "evaluate",
    "features_for_trials",
    "finite_diff_gradient",
    "fuse_scores",
    "generate_corpus",
    "generate_corpus_with_truth",
    "j_matrix",
    "l2_normalize",
    "load_model",
    "make_head",
    "matrix_linear_score",
    "min_tdcf",
    "orthogonality_penalty",
    "parse_enrollment_map",
    "parse_trials",
    "partition_scores",
    "prob_matrix",
    "prob_product_score",
    "read_embedding_store",
    "read_enrollment_map",
    "read_scores",
    "read_trials",
    "save_model",
    "score_matrix",
    "score_sum",
    "score_trials",
    "serialize_trials",
    "sigmoid",
    "train_system",
    "trial_targets",
    "weighted_bce",
    "write_embedding_store",
    "write_scores",
    "write_trials",
]
