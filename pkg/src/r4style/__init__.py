"""Style-feature regression and masked sensorial-word prediction toolkit.

Pipeline: extract per-occurrence records from text (lexicon, corpus),
assemble matrices (matrixio), fit low-rank style-to-word regressions
(solver), compress encoder embeddings (slim), and train/evaluate a
feed-forward classifier over the combined features (classifier). The cli
module exposes each stage as a subcommand.
"""

from ._accel import BACKEND, thread_cap
from .classifier import (
    MLP,
    MODES,
    DivergenceError,
    EvalReport,
    FeatureSpec,
    MissingComponentError,
    accuracy,
    build_features,
    evaluate_cv,
    grad_check,
    load_mlp,
    most_frequent_classes,
    predict_proba,
    restrict_to_classes,
    save_mlp,
    train,
)
from .classifier import predict as predict_classes
from .corpus import (
    MASK_TOKEN,
    SampleSizeError,
    SensorialRecord,
    extract_records,
    iter_documents,
    normalize,
    read_records,
    sample_records,
    segment,
    write_records,
)
from .lexicon import (
    Category,
    CategoryLexicon,
    DegenerateSentenceError,
    DuplicateWordError,
    LexiconParseError,
    OneHotTarget,
    SensorialVocabulary,
    StyleVector,
    UnknownWordError,
    load_category_lexicon,
    load_vocabulary,
    one_hot,
    style_vector,
)
from .matrixio import (
    Dataset,
    IndexedTargets,
    MatrixFormatError,
    assemble,
    read_matrix,
    write_matrix,
)
from .seeds import derive_seed
from .slim import (
    DEFAULT_RANKS,
    TruncatedSVD,
    load_svd,
    project,
    save_svd,
    transform,
    truncated_svd,
)
from .solver import (
    NonFiniteObjectiveError,
    R4Model,
    SingularDesignError,
    SRRRModel,
    SweepResult,
    export_heatmap,
    fit_ols,
    fit_r4,
    fit_srrr,
    latent_features,
    latent_liwc,
    load_model,
    predict,
    prediction_mse,
    rank_sweep,
    save_model,
    srrr_lambda_max,
)

__all__ = [
    "BACKEND",
    "MASK_TOKEN",
    "MODES",
    "DEFAULT_RANKS",
    "Category",
    "CategoryLexicon",
    "Dataset",
    "DegenerateSentenceError",
    "DivergenceError",
    "DuplicateWordError",
    "EvalReport",
    "FeatureSpec",
    "IndexedTargets",
    "LexiconParseError",
    "MLP",
    "MatrixFormatError",
    "MissingComponentError",
    "NonFiniteObjectiveError",
    "OneHotTarget",
    "R4Model",
    "SRRRModel",
    "SampleSizeError",
    "SensorialRecord",
    "SensorialVocabulary",
    "SingularDesignError",
    "StyleVector",
    "SweepResult",
    "TruncatedSVD",
    "UnknownWordError",
    "accuracy",
    "assemble",
    "build_features",
    "derive_seed",
    "evaluate_cv",
    "export_heatmap",
    "extract_records",
    "fit_ols",
    "fit_r4",
    "fit_srrr",
    "grad_check",
    "iter_documents",
    "latent_features",
    "latent_liwc",
    "load_category_lexicon",
    "load_mlp",
    "load_model",
    "load_svd",
    "load_vocabulary",
    "most_frequent_classes",
    "normalize",
    "one_hot",
    "predict",
    "predict_classes",
    "predict_proba",
    "prediction_mse",
    "project",
    "rank_sweep",
    "read_matrix",
    "read_records",
    "restrict_to_classes",
    "sample_records",
    "save_mlp",
    "save_model",
    "save_svd",
    "segment",
    "srrr_lambda_max",
    "style_vector",
    "thread_cap",
    "train",
    "transform",
    "truncated_svd",
    "write_matrix",
    "write_records",
]
