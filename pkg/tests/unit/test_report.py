import csv
import json
from pathlib import Path
from typing import Sequence, Tuple

import pytest

from sentibench.data import DatasetSplit
from sentibench.evaluation.benchmark import BenchmarkResult
from sentibench.evaluation.metrics import accuracy
from sentibench.evaluation.report import BenchmarkReport, build_report, render_markdown, strip_timestamps, write_manifest, write_report
from sentibench.evaluation.results import CellFailure, RunResult
from sentibench.models import ModelKind, ModelSpec
from tests.config import SIGNIFICANCE_TEST_ITERATIONS, TOY_SEED
from tests.toy_data import make_toy_split

GOLD = tuple(index % 2 for index in range(40))
BOW = ModelSpec(kind=ModelKind.BOW)
LSTM_8 = ModelSpec(kind=ModelKind.LSTM, dim=8)
LSTM_16 = ModelSpec(kind=ModelKind.LSTM, dim=16)
SEEDS = (1, 2, 3)


def make_run(spec: ModelSpec, dataset: str, seed: int, predictions: Sequence[int]) -> RunResult:
    return RunResult(kind=spec.kind.value, dim=spec.dim, dataset=dataset, seed=seed, predictions=tuple(predictions), accuracy=accuracy(GOLD, predictions), label=spec.label)


def flipped(count: int) -> Tuple[int, ...]:
    return tuple(1 - label if index < count else label for index, label in enumerate(GOLD))


@pytest.fixture
def benchmark_result() -> BenchmarkResult:
    """BOW is perfect, LSTM-8 always predicts 0, LSTM-16 is 75% correct on "a" and failed on "b" """
    result = BenchmarkResult(specs=(BOW, LSTM_8, LSTM_16), dataset_names=("a", "b"), seeds=SEEDS, gold={"a": GOLD, "b": GOLD}, num_labels={"a": 2, "b": 2})
    for dataset in ("a", "b"):
        result.runs.append(make_run(BOW, dataset, 1, GOLD))
        result.runs += [make_run(LSTM_8, dataset, seed, [0] * len(GOLD)) for seed in SEEDS]
    result.runs += [make_run(LSTM_16, "a", seed, flipped(10)) for seed in SEEDS]
    result.failures.append(CellFailure(kind="lstm", dim=16, dataset="b", label="LSTM-16", error="RuntimeError: exploded"))
    return result


@pytest.fixture
def report(benchmark_result: BenchmarkResult, small_split: DatasetSplit) -> BenchmarkReport:
    return build_report(benchmark_result, {"a": small_split}, iterations=SIGNIFICANCE_TEST_ITERATIONS)


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestBuildReport:
    def test_rows_follow_spec_order(self, report: BenchmarkReport):
        assert [row.label for row in report.rows] == ["BOW", "LSTM-8", "LSTM-16"]
        assert report.datasets == ["a", "b"]
        assert report.seeds == list(SEEDS)

    def test_cell_summaries(self, report: BenchmarkReport):
        bow, lstm_8, lstm_16 = report.rows
        assert bow.cells["a"].accuracies == [1.0]
        assert (bow.cells["a"].mean, bow.cells["a"].std) == (1.0, 0.0)
        assert lstm_8.cells["b"].accuracies == [0.5, 0.5, 0.5]
        assert lstm_16.cells["a"].mean == pytest.approx(0.75)

    def test_failed_cell(self, report: BenchmarkReport):
        cell = report.rows[2].cells["b"]
        assert cell.failed
        assert cell.error == "RuntimeError: exploded"
        assert cell.mean is None

    def test_macro_average_is_missing_for_rows_with_a_failed_cell(self, report: BenchmarkReport):
        assert [row.macro_average for row in report.rows] == [1.0, 0.5, None]

    def test_cell_without_runs_is_failed(self, benchmark_result: BenchmarkResult):
        benchmark_result.runs = [run for run in benchmark_result.runs if not (run.label == "BOW" and run.dataset == "b")]
        cell = build_report(benchmark_result, {}, iterations=SIGNIFICANCE_TEST_ITERATIONS).rows[0].cells["b"]
        assert cell.failed
        assert cell.error == "no runs"

    def test_best_mean_ignores_failed_cells(self, report: BenchmarkReport):
        assert report.best_mean("a") == 1.0
        assert report.best_mean("b") == 1.0
        assert report.best_mean("missing") is None

    def test_significance_covers_systems_with_runs(self, report: BenchmarkReport):
        assert report.significance["a"].systems == ("BOW", "LSTM-8", "LSTM-16")
        assert report.significance["b"].systems == ("BOW", "LSTM-8")

    def test_single_run_is_paired_with_every_seed(self, report: BenchmarkReport):
        entry = report.significance["a"].get("LSTM-8", "BOW")
        assert len(entry.p_values) == 3
        assert entry.verdict

    def test_confusion_matrices_are_summed_over_runs(self, report: BenchmarkReport):
        assert report.confusion["a"]["BOW"] == {"matrix": [[20, 0], [0, 20]], "per_class_accuracy": [1.0, 1.0]}
        assert report.confusion["a"]["LSTM-8"] == {"matrix": [[60, 0], [60, 0]], "per_class_accuracy": [1.0, 0.0]}
        assert "LSTM-16" not in report.confusion["b"]

    def test_statistics_of_the_given_datasets(self, report: BenchmarkReport):
        assert set(report.statistics) == {"a"}
        assert (report.statistics["a"]["train"], report.statistics["a"]["dev"], report.statistics["a"]["test"]) == (60, 20, 20)
        assert report.statistics["a"]["labels"] == 2

    def test_dimension_trend(self, report: BenchmarkReport):
        assert report.dimension_trend == {
            "lstm": {
                "a": {"means": {"8": 0.5, "16": pytest.approx(0.75)}, "best_dim": 16},
                "b": {"means": {"8": 0.5}, "best_dim": 8},
            }
        }

    def test_dimension_trend_tie_prefers_the_smaller_dimension(self, benchmark_result: BenchmarkResult):
        benchmark_result.runs = [run for run in benchmark_result.runs if run.label != "LSTM-16"]
        benchmark_result.runs += [make_run(LSTM_16, "a", seed, [1] * len(GOLD)) for seed in SEEDS]
        trend = build_report(benchmark_result, {}, iterations=SIGNIFICANCE_TEST_ITERATIONS).dimension_trend
        assert trend["lstm"]["a"]["best_dim"] == 8

    def test_without_reference_dataset_there_is_no_emoticon_analysis(self, report: BenchmarkReport):
        assert report.reference_dataset is None
        assert report.chi_squared == {}

    def test_json_serializable(self, report: BenchmarkReport):
        document = json.loads(json.dumps(report.to_dict()))
        assert document["rows"][2]["cells"]["b"]["error"] == "RuntimeError: exploded"
        assert document["chi_squared"] == {"reference": None, "results": {}}


class TestEmoticonAnalysis:
    @pytest.fixture
    def emoticon_report(self, toy_split: DatasetSplit) -> BenchmarkReport:
        datasets = {
            "emoticons": make_toy_split(name="emoticons", seed=TOY_SEED + 2, emoticons=True),
            "more_emoticons": make_toy_split(name="more_emoticons", seed=TOY_SEED + 3, emoticons=True),
            "toy": toy_split,
        }
        result = BenchmarkResult(
            specs=(),
            dataset_names=tuple(datasets),
            seeds=(1,),
            gold={name: tuple(example.label for example in split.test) for name, split in datasets.items()},
            num_labels={name: 2 for name in datasets},
        )
        return build_report(result, datasets, iterations=SIGNIFICANCE_TEST_ITERATIONS, reference_dataset="emoticons")

    def test_reference_is_not_compared_with_itself(self, emoticon_report: BenchmarkReport):
        assert emoticon_report.reference_dataset == "emoticons"
        assert set(emoticon_report.chi_squared) == {"more_emoticons", "toy"}

    def test_identical_distributions(self, emoticon_report: BenchmarkReport):
        entry = emoticon_report.chi_squared["more_emoticons"]
        assert entry["chi2"] == pytest.approx(0.0)
        assert entry["df"] == 1
        assert entry["p"] == pytest.approx(1.0)

    def test_degenerate_table_is_recorded(self, emoticon_report: BenchmarkReport, caplog):
        entry = emoticon_report.chi_squared["toy"]
        assert "error" in entry
        assert sum(entry["counts"]["a"].values()) == 0
        assert any("degenerate" in record.message for record in caplog.records)

    def test_degenerate_row_in_markdown(self, emoticon_report: BenchmarkReport):
        assert "| toy | degenerate | - | - |" in render_markdown(emoticon_report)


class TestRenderMarkdown:
    def test_header(self, report: BenchmarkReport):
        lines = render_markdown(report).splitlines()
        assert lines[0] == "# Benchmark report"
        assert lines[2] == "| Model | a | b | Macro-Avg. |"

    def test_rows(self, report: BenchmarkReport):
        markdown = render_markdown(report)
        assert "| BOW | **100.0** | **100.0** | 100.0 |" in markdown
        assert "| LSTM-8 | 50.0 ± 0.0 | 50.0 ± 0.0 | 50.0 |" in markdown
        assert "| LSTM-16 | 75.0 ± 0.0 | failed | - |" in markdown

    def test_benchmark_datasets_use_display_names(self):
        report = BenchmarkReport(datasets=["sst_fine", "semeval"], seeds=[1])
        assert "| Model | SST-fine | SemEval | Macro-Avg. |" in render_markdown(report)

    def test_significance_section(self, report: BenchmarkReport):
        markdown = render_markdown(report)
        assert "## Significance" in markdown
        line = next(line for line in markdown.splitlines() if line.startswith("- a:"))
        assert "BOW vs LSTM-8" in line

    def test_statistics_section(self, report: BenchmarkReport):
        assert "| a | 2 | 60 | 20 | 20 | 6.00 |" in render_markdown(report)


class TestWriteReport:
    def test_written_files(self, report: BenchmarkReport, tmp_path: Path):
        written = write_report(report, tmp_path, manifest={"command": "benchmark"})
        names = {path.relative_to(tmp_path).as_posix() for path in written}
        assert {"report.json", "report.csv", "plot_data.csv", "report.md", "manifest.json", "confusion/BOW__a.csv", "confusion/LSTM-16__a.csv"} <= names
        assert "confusion/LSTM-16__b.csv" not in names
        assert all(path.exists() for path in written)

    def test_report_csv(self, report: BenchmarkReport, tmp_path: Path):
        write_report(report, tmp_path)
        with (tmp_path / "report.csv").open(encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 6
        failed = next(row for row in rows if row["model"] == "LSTM-16" and row["dataset"] == "b")
        assert failed["failed"] == "True"
        assert failed["mean"] == ""

    def test_plot_data_skips_failed_cells(self, report: BenchmarkReport, tmp_path: Path):
        write_report(report, tmp_path)
        with (tmp_path / "plot_data.csv").open(encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 5
        assert list(rows[0]) == ["model", "kind", "dim", "dataset", "mean", "std"]

    def test_confusion_csv(self, report: BenchmarkReport, tmp_path: Path):
        write_report(report, tmp_path)
        assert (tmp_path / "confusion" / "BOW__a.csv").read_text(encoding="utf-8") == "gold,0,1\n0,20,0\n1,0,20\n"

    def test_report_json_carries_manifest(self, report: BenchmarkReport, tmp_path: Path):
        write_report(report, tmp_path, manifest={"command": "benchmark"})
        document = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert document["manifest"] == {"command": "benchmark"}
        assert "generated_at" in document

    def test_output_is_deterministic_apart_from_timestamps(self, report: BenchmarkReport, tmp_path: Path):
        write_report(report, tmp_path / "first", manifest={"seed": 1})
        write_report(report, tmp_path / "second", manifest={"seed": 1})
        for name in ("report.json", "manifest.json"):
            first = json.loads((tmp_path / "first" / name).read_text(encoding="utf-8"))
            second = json.loads((tmp_path / "second" / name).read_text(encoding="utf-8"))
            assert strip_timestamps(first) == strip_timestamps(second)
        for name in ("report.csv", "plot_data.csv", "report.md"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


class TestManifest:
    def test_write_manifest(self, tmp_path: Path):
        path = write_manifest(tmp_path / "out", {"command": "retrofit"}, filename="vectors.txt.manifest.json")
        assert path == tmp_path / "out" / "vectors.txt.manifest.json"
        document = json.loads(path.read_text(encoding="utf-8"))
        assert document["command"] == "retrofit"
        assert "generated_at" in document

    def test_strip_timestamps_is_recursive(self):
        document = {"generated_at": "now", "nested": [{"generated_at": "now", "value": 1}], "value": 2}
        assert strip_timestamps(document) == {"nested": [{"value": 1}], "value": 2}
