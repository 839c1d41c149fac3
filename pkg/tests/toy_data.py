"""Generators of the synthetic datasets, embeddings and corpora the tests run on"""
from typing import Dict, List, Optional

import numpy as np

from sentibench.data import DatasetSplit, LabeledExample, LabelScheme, Vocabulary
from sentibench.embeddings import EmbeddingMatrix
from tests.config import DISTANT_NEGATIVE_MARKER, DISTANT_POSITIVE_MARKER, FILLER_WORDS, NEGATIVE_WORDS, POSITIVE_WORDS, TOY_DIM, TOY_SEED, TOY_SIZES


def make_toy_text(rng: np.random.Generator, label: int, emoticons: bool = False) -> str:
    """Three sentiment words of the label's polarity among three fillers, in random order"""
    sentiment = rng.choice(POSITIVE_WORDS if label == 1 else NEGATIVE_WORDS, size=3)
    fillers = rng.choice(FILLER_WORDS, size=3)
    words = [str(word) for word in rng.permutation(np.concatenate([sentiment, fillers]))]
    if emoticons:
        words.append(DISTANT_POSITIVE_MARKER if label == 1 else DISTANT_NEGATIVE_MARKER)
    return " ".join(words)


def make_toy_split(name: str = "toy", seed: int = TOY_SEED, sizes: Optional[Dict[str, int]] = None, emoticons: bool = False) -> DatasetSplit:
    """Linearly separable binary dataset; labels alternate within every partition"""
    sizes = sizes if sizes is not None else TOY_SIZES
    rng = np.random.default_rng(seed)
    partitions = {partition: tuple(LabeledExample.from_text(make_toy_text(rng, index % 2, emoticons), index % 2) for index in range(size)) for partition, size in sizes.items()}
    return DatasetSplit(name=name, scheme=LabelScheme.with_labels(2), **partitions)


def toy_vocabulary_words() -> List[str]:
    return sorted({*POSITIVE_WORDS, *NEGATIVE_WORDS, *FILLER_WORDS})


def make_toy_embeddings(dim: int = TOY_DIM, seed: int = TOY_SEED) -> EmbeddingMatrix:
    """Hand-crafted vectors: coordinate 0 carries the polarity, the rest is small noise"""
    rng = np.random.default_rng(seed)
    words = toy_vocabulary_words()
    matrix = rng.uniform(-0.1, 0.1, size=(len(words), dim))
    for row, word in enumerate(words):
        if word in POSITIVE_WORDS:
            matrix[row, 0] = 1.0
        elif word in NEGATIVE_WORDS:
            matrix[row, 0] = -1.0
    return EmbeddingMatrix(vocab=Vocabulary.from_words(words), matrix=matrix)


def make_distant_lines(count: int, seed: int = TOY_SEED) -> List[str]:
    """Toy texts followed by the emoticon of their polarity"""
    rng = np.random.default_rng(seed)
    lines = []
    for index in range(count):
        label = index % 2
        marker = DISTANT_POSITIVE_MARKER if label == 1 else DISTANT_NEGATIVE_MARKER
        lines.append(f"{make_toy_text(rng, label)} {marker}")
    return lines
