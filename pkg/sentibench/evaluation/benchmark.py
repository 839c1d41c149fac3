from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Sequence, Tuple

from sentibench.data import DatasetSplit
from sentibench.evaluation.metrics import accuracy
from sentibench.evaluation.results import CellFailure, RunResult
from sentibench.evaluation.tuning import tune_hyperparameters
from sentibench.exceptions import MetricInputException, ModelSpecException, RunCountMismatchException
from sentibench.logger import sentibench_logger
from sentibench.models import ModelSpec, base_embeddings, predict_labels, train_sentiment_model

if TYPE_CHECKING:
    from sentibench.store.run_repository import RunRecordRepository

DEFAULT_SEEDS: Tuple[int, ...] = (1, 2, 3, 4, 5)

RunKey = Tuple[str, int, str, int]


@dataclass
class BenchmarkResult:
    """Every run of a benchmark, the failed cells and the test gold labels they are scored against"""

    specs: Tuple[ModelSpec, ...]
    dataset_names: Tuple[str, ...]
    seeds: Tuple[int, ...]
    runs: List[RunResult] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    gold: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    num_labels: Dict[str, int] = field(default_factory=dict)

    @property
    def row_labels(self) -> List[str]:
        return list(dict.fromkeys(spec.label for spec in self.specs))

    def runs_for(self, label: str, dataset: str) -> List[RunResult]:
        """Runs of one report cell in seed order"""
        return sorted((run for run in self.runs if run.label == label and run.dataset == dataset), key=lambda run: run.seed)

    def failure_for(self, label: str, dataset: str) -> Optional[CellFailure]:
        for failure in self.failures:
            if failure.label == label and failure.dataset == dataset:
                return failure
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "specs": [spec.to_dict() for spec in self.specs],
            "datasets": list(self.dataset_names),
            "seeds": list(self.seeds),
            "runs": [run.to_dict() for run in self.runs],
            "failures": [failure.to_dict() for failure in self.failures],
            "gold": {name: list(labels) for name, labels in self.gold.items()},
            "num_labels": dict(self.num_labels),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BenchmarkResult":
        """Rebuilds a result written by to_dict

        Raises:
            MetricInputException: If the document is not a benchmark result
        """
        try:
            return cls(
                specs=tuple(ModelSpec.from_dict(spec) for spec in data["specs"]),
                dataset_names=tuple(data["datasets"]),
                seeds=tuple(data["seeds"]),
                runs=[RunResult(**run) for run in data["runs"]],
                failures=[CellFailure(**failure) for failure in data["failures"]],
                gold={name: tuple(labels) for name, labels in data["gold"].items()},
                num_labels={name: int(count) for name, count in data["num_labels"].items()},
            )
        except (KeyError, TypeError, ModelSpecException) as format_error:
            raise MetricInputException("Document does not describe a benchmark result") from format_error


def cell_seeds(spec: ModelSpec, seeds: Sequence[int]) -> Tuple[int, ...]:
    """Neural kinds run once per seed, deterministic feature pipelines once"""
    return tuple(seeds) if spec.kind.is_neural else tuple(seeds[:1])


def run_cell(spec: ModelSpec, data: DatasetSplit, seeds: Sequence[int], tuning_seed: int, tune: bool = True) -> Tuple[List[RunResult], Optional[CellFailure]]:
    """Trains and scores one (model, dataset) cell for the given seeds

    Args:
        spec (ModelSpec): The system; a neural spec without fixed epochs is tuned first
        data (DatasetSplit): The dataset
        seeds (Sequence[int]): The seeds still to run
        tuning_seed (int): Seed of the cell's shared embeddings and of the tuning runs
        tune (bool): Whether to grid-search hidden size and epochs of neural kinds on dev

    Returns:
        Tuple[List[RunResult], Optional[CellFailure]]: The finished runs and the failure that stopped the cell, if any
    """
    runs: List[RunResult] = []
    gold = [example.label for example in data.test]
    try:
        concrete = replace(spec, seed=tuning_seed)
        embeddings = base_embeddings(concrete, data) if spec.kind.uses_embeddings else None
        if tune and spec.kind.is_neural and spec.epochs is None:
            concrete = tune_hyperparameters(concrete, data, embeddings=embeddings)
        for seed in seeds:
            model = train_sentiment_model(replace(concrete, seed=seed), data, embeddings)
            predictions = [int(label) for label in predict_labels(model, data.test)]
            runs.append(
                RunResult(
                    kind=spec.kind.value,
                    dim=spec.dim,
                    dataset=data.name,
                    seed=seed,
                    predictions=tuple(predictions),
                    accuracy=accuracy(gold, predictions),
                    label=spec.label,
                    dev_accuracy=model.dev_accuracy,
                    hyperparameters=dict(model.hyperparameters),
                )
            )
        return runs, None
    except Exception as exception:  # pylint: disable=broad-except
        # A failing cell is recorded in the report and must not abort the remaining cells.
        sentibench_logger.error("Benchmark cell failed", kind=spec.kind.value, dim=spec.dim, dataset=data.name, error=repr(exception))
        return runs, CellFailure(kind=spec.kind.value, dim=spec.dim, dataset=data.name, label=spec.label, error=f"{type(exception).__name__}: {exception}")


def run_benchmark(
    specs: Sequence[ModelSpec],
    datasets: Mapping[str, DatasetSplit],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    jobs: int = 1,
    tune: bool = True,
    store: Optional["RunRecordRepository"] = None,
    config_hash: str = "",
    resume: bool = False,
) -> BenchmarkResult:
    """Trains every spec on every dataset and collects the per-run test predictions

    Args:
        specs (Sequence[ModelSpec]): The systems, one report row each
        datasets (Mapping[str, DatasetSplit]): The datasets by name, in report column order
        seeds (Sequence[int]): Seeds of the neural runs; deterministic kinds use the first one
        jobs (int): Worker processes; 1 runs in process
        tune (bool): Whether to tune neural hidden size and epochs on dev
        store (Optional[RunRecordRepository]): Receives every finished run
        config_hash (str): Key of the runs in the store
        resume (bool): Skip runs the store already holds for config_hash

    Returns:
        BenchmarkResult: Runs ordered by spec, dataset and seed, independent of completion order
    """
    if not seeds:
        raise RunCountMismatchException("A benchmark needs at least one seed")
    datasets = {name: split if split.name == name else replace(split, name=name) for name, split in datasets.items()}
    result = BenchmarkResult(specs=tuple(specs), dataset_names=tuple(datasets), seeds=tuple(seeds))
    for name, split in datasets.items():
        result.gold[name] = tuple(example.label for example in split.test)
        result.num_labels[name] = split.scheme.num_labels

    stored: Dict[RunKey, RunResult] = {}
    if resume and store is not None:
        stored = {(run.kind, run.dim, run.dataset, run.seed): run for run in store.completed_runs(config_hash)}

    tasks = []
    for spec in specs:
        for name, split in datasets.items():
            planned = cell_seeds(spec, seeds)
            pending = tuple(seed for seed in planned if (spec.kind.value, spec.dim, name, seed) not in stored)
            tasks.append((spec, split, pending, planned[0]))
    sentibench_logger.info("Running benchmark", specs=len(specs), datasets=len(datasets), seeds=list(seeds), cells=len(tasks), jobs=jobs, resumed=len(stored))

    outcomes: List[Tuple[List[RunResult], Optional[CellFailure]]]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(run_cell, spec, split, pending, tuning_seed, tune) if pending else None for spec, split, pending, tuning_seed in tasks]
            outcomes = [future.result() if future is not None else ([], None) for future in futures]
    else:
        outcomes = [run_cell(spec, split, pending, tuning_seed, tune) if pending else ([], None) for spec, split, pending, tuning_seed in tasks]

    for (spec, split, _, _), (runs, failure) in zip(tasks, outcomes):
        if store is not None:
            for run in runs:
                store.record_run(config_hash, run)
        by_seed = {run.seed: run for run in runs}
        for seed in cell_seeds(spec, seeds):
            key = (spec.kind.value, spec.dim, split.name, seed)
            run = by_seed.get(seed, stored.get(key))
            if run is not None:
                result.runs.append(replace(run, label=spec.label))
        if failure is not None:
            result.failures.append(failure)

    sentibench_logger.info("Running benchmark succeeded", runs=len(result.runs), failures=len(result.failures))
    return result
