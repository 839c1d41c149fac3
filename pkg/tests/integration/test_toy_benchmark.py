from pathlib import Path
from typing import Dict

import pytest

from sentibench.data import DatasetSplit
from sentibench.evaluation.benchmark import BenchmarkResult, run_benchmark
from sentibench.models import ModelKind, ModelSpec
from tests.config import TOY_DIM

NEURAL_OVERRIDES = {"hidden": 8, "lstm_units": 8, "num_filters": 4, "learning_rate": 0.01, "dropout": 0.2, "batch_size": 16, "epochs": 15}


@pytest.fixture(scope="module")
def toy_benchmark(toy_split: DatasetSplit, toy_files: Dict[str, Path]) -> BenchmarkResult:
    """Every model kind trained once on the 500-example toy dataset"""
    embeddings, lexicon = str(toy_files["embeddings"]), str(toy_files["lexicon"])
    specs = [
        ModelSpec(kind=ModelKind.BOW),
        ModelSpec(kind=ModelKind.AVE, dim=TOY_DIM, embeddings=embeddings),
        ModelSpec(kind=ModelKind.RETROFIT, dim=TOY_DIM, embeddings=embeddings, lexicon=lexicon),
        ModelSpec(kind=ModelKind.JOINT, dim=TOY_DIM, embeddings=embeddings),
        *(ModelSpec(kind=kind, dim=TOY_DIM, embeddings=embeddings, **NEURAL_OVERRIDES) for kind in (ModelKind.LSTM, ModelKind.BILSTM, ModelKind.CNN)),
    ]
    return run_benchmark(specs, {"toy": toy_split}, seeds=(1,), tune=False)


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestToyBenchmark:
    def test_no_cell_fails(self, toy_benchmark: BenchmarkResult):
        assert toy_benchmark.failures == []
        assert len(toy_benchmark.runs) == 7

    @pytest.mark.parametrize("label", ["BOW", "AVE-8", "RETROFIT-8", "JOINT-8", "LSTM-8", "BiLSTM-8", "CNN-8"])
    def test_every_kind_separates_the_toy_data(self, toy_benchmark: BenchmarkResult, label: str):
        (run,) = toy_benchmark.runs_for(label, "toy")
        assert run.accuracy > 0.95
