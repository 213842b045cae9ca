"""Topic models with side-data-driven Dirichlet priors (LDA, DMR, neural prior)."""

from .corpus import (
    Corpus,
    Document,
    Schema,
    SyntheticConfig,
    Vocabulary,
    build_vocabulary,
    generate_synthetic,
    load_corpus,
    tokenize,
)
from .estimator import NNLDA
from .evaluation import (
    generate_comment,
    grouping_scores,
    infer_theta,
    lift,
    log_perplexity,
    top_words,
)
from .prior import AdamConfig, DMRPrior, FixedPrior, NeuralPrior, init_constant, init_neural
from .trainer import TopicModel, TrainConfig, TrainReport, fit, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "Corpus",
    "DMRPrior",
    "Document",
    "FixedPrior",
    "NNLDA",
    "NeuralPrior",
    "Schema",
    "SyntheticConfig",
    "TopicModel",
    "TrainConfig",
    "TrainReport",
    "Vocabulary",
    "build_vocabulary",
    "fit",
    "generate_comment",
    "generate_synthetic",
    "grouping_scores",
    "infer_theta",
    "init_constant",
    "init_neural",
    "lift",
    "load_corpus",
    "load_model",
    "log_perplexity",
    "save_model",
    "tokenize",
    "top_words",
]
