import logging
from pathlib import Path
from typing import Dict

import pytest

from sentibench.data import DatasetSplit, save_dataset
from sentibench.embeddings import EmbeddingMatrix, save_embeddings
from sentibench.logger import LOGGER_NAME
from tests.config import SYNONYM_PAIRS, TOY_SEED
from tests.toy_data import make_distant_lines, make_toy_embeddings, make_toy_split


@pytest.fixture(autouse=True)
def debug_logs(caplog):
    """Capture the debug logs of the sentibench logger"""
    caplog.set_level(logging.DEBUG, logger=LOGGER_NAME)
    yield caplog


@pytest.fixture(scope="session")
def toy_split() -> DatasetSplit:
    """The 500-example toy dataset (300 train, 100 dev, 100 test)"""
    return make_toy_split()


@pytest.fixture(scope="session")
def small_split() -> DatasetSplit:
    return make_toy_split(name="small", seed=TOY_SEED + 1, sizes={"train": 60, "dev": 20, "test": 20})


@pytest.fixture(scope="session")
def toy_embeddings() -> EmbeddingMatrix:
    return make_toy_embeddings()


@pytest.fixture(scope="session")
def toy_files(tmp_path_factory) -> Dict[str, Path]:
    """The toy dataset, embeddings, lexicon and corpora on disk"""
    root = tmp_path_factory.mktemp("toy")
    save_dataset(make_toy_split(), root / "toy")
    save_dataset(make_toy_split(name="emoticons", seed=TOY_SEED + 2, emoticons=True), root / "emoticons")
    save_embeddings(make_toy_embeddings(), root / "embeddings.txt")
    (root / "lexicon.txt").write_text("".join(f"{first}\t{second}\n" for first, second in SYNONYM_PAIRS), encoding="utf-8")
    (root / "distant.txt").write_text("\n".join(make_distant_lines(200)) + "\n", encoding="utf-8")
    (root / "corpus.txt").write_text("\n".join(example.text for example in make_toy_split().train) + "\n", encoding="utf-8")
    return {
        "root": root,
        "dataset": root / "toy",
        "emoticons": root / "emoticons",
        "embeddings": root / "embeddings.txt",
        "lexicon": root / "lexicon.txt",
        "distant": root / "distant.txt",
        "corpus": root / "corpus.txt",
    }
