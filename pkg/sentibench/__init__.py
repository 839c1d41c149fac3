__version__ = "1.0.0"

from .data import DatasetSplit, LabeledExample, LabelScheme, Vocabulary, load_dataset
from .embeddings import EmbeddingMatrix, SkipgramConfig, load_embeddings, save_embeddings, train_skipgram
from .joint import JointConfig, train_joint
from .models import ModelKind, ModelSpec, TrainedModel, predict_labels, train_sentiment_model
from .retrofit import LexiconGraph, RetrofitConfig, load_lexicon, retrofit_embeddings

__all__ = [
    "DatasetSplit",
    "EmbeddingMatrix",
    "JointConfig",
    "LabelScheme",
    "LabeledExample",
    "LexiconGraph",
    "ModelKind",
    "ModelSpec",
    "RetrofitConfig",
    "SkipgramConfig",
    "TrainedModel",
    "Vocabulary",
    "load_dataset",
    "load_embeddings",
    "load_lexicon",
    "predict_labels",
    "retrofit_embeddings",
    "save_embeddings",
    "train_joint",
    "train_sentiment_model",
    "train_skipgram",
]
