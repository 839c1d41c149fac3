"""Assembly of benchmark reports and their JSON, CSV and markdown renderings"""
import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from sentibench.data import DatasetSplit, dataset_stats, display_name
from sentibench.evaluation.benchmark import BenchmarkResult
from sentibench.evaluation.emoticons import chi_squared_emoticons
from sentibench.evaluation.metrics import confusion_matrix, macro_average, mean_and_std, per_class_accuracy
from sentibench.evaluation.significance import DEFAULT_ITERATIONS, SignificanceMatrix, significance_matrix
from sentibench.exceptions import DegenerateContingencyTableException
from sentibench.logger import sentibench_logger

TIMESTAMP_KEY = "generated_at"


@dataclass(frozen=True)
class CellSummary:
    """Accuracy statistics of one (model, dataset) cell"""

    accuracies: List[float]
    mean: Optional[float]
    std: Optional[float]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None or self.mean is None

    def to_dict(self) -> Dict[str, Any]:
        return {"accuracies": list(self.accuracies), "mean": self.mean, "std": self.std, "runs": len(self.accuracies), "error": self.error}


@dataclass
class ReportRow:
    label: str
    kind: str
    dim: int
    cells: Dict[str, CellSummary] = field(default_factory=dict)
    macro_average: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "kind": self.kind, "dim": self.dim, "macro_average": self.macro_average, "cells": {name: cell.to_dict() for name, cell in self.cells.items()}}


@dataclass
class BenchmarkReport:
    """Accuracy table, significance matrices, emoticon analysis and confusion matrices of a benchmark"""

    datasets: List[str]
    seeds: List[int]
    rows: List[ReportRow] = field(default_factory=list)
    significance: Dict[str, SignificanceMatrix] = field(default_factory=dict)
    chi_squared: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    reference_dataset: Optional[str] = None
    confusion: Dict[str, Dict[str, Dict[str, Any]]] = field(default_factory=dict)
    statistics: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    dimension_trend: Dict[str, Dict[str, Dict[str, Any]]] = field(default_factory=dict)

    def best_mean(self, dataset: str) -> Optional[float]:
        means = [row.cells[dataset].mean for row in self.rows if dataset in row.cells and not row.cells[dataset].failed]
        return max(means) if means else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "datasets": list(self.datasets),
            "seeds": list(self.seeds),
            "rows": [row.to_dict() for row in self.rows],
            "significance": {name: matrix.to_dict() for name, matrix in self.significance.items()},
            "chi_squared": {"reference": self.reference_dataset, "results": self.chi_squared},
            "confusion": self.confusion,
            "statistics": self.statistics,
            "dimension_trend": self.dimension_trend,
        }


def _finite_or_none(values: np.ndarray) -> List[Optional[float]]:
    return [float(value) if math.isfinite(value) else None for value in values]


def _summarize(result: BenchmarkResult, label: str, dataset: str) -> CellSummary:
    failure = result.failure_for(label, dataset)
    accuracies = [run.accuracy for run in result.runs_for(label, dataset)]
    if failure is not None or not accuracies:
        return CellSummary(accuracies=accuracies, mean=None, std=None, error=failure.error if failure is not None else "no runs")
    mean, std = mean_and_std(accuracies)
    return CellSummary(accuracies=accuracies, mean=mean, std=std)


def _dimension_trend(rows: Sequence[ReportRow], datasets: Sequence[str]) -> Dict[str, Dict[str, Dict[str, Any]]]:
    trend: Dict[str, Dict[str, Dict[str, Any]]] = {}
    for kind in dict.fromkeys(row.kind for row in rows):
        kind_rows = sorted((row for row in rows if row.kind == kind), key=lambda row: row.dim)
        if len(kind_rows) < 2:
            continue
        trend[kind] = {}
        for dataset in datasets:
            means = {row.dim: row.cells[dataset].mean for row in kind_rows if not row.cells[dataset].failed}
            best = max(means, key=lambda dim: (means[dim], -dim)) if means else None
            trend[kind][dataset] = {"means": {str(dim): mean for dim, mean in means.items()}, "best_dim": best}
    return trend


def build_report(
    result: BenchmarkResult,
    datasets: Mapping[str, DatasetSplit],
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 1,
    reference_dataset: Optional[str] = "semeval",
) -> BenchmarkReport:
    """Summarizes the runs of a benchmark

    Args:
        result (BenchmarkResult): The runs and failures
        datasets (Mapping[str, DatasetSplit]): The evaluated datasets, for statistics and the emoticon analysis
        iterations (int): Shuffles of every approximate randomization test
        seed (int): Seed of the significance tests
        reference_dataset (Optional[str]): Dataset every other dataset is compared with in the emoticon analysis

    Returns:
        BenchmarkReport: The assembled report

    Notes:
        - The macro-average of a row covers all benchmark datasets of the run and is missing when a cell failed.
        - Degenerate emoticon tables are reported as errors with their counts instead of aborting the report.
    """
    sentibench_logger.info("Building report", rows=len(result.row_labels), datasets=len(result.dataset_names), iterations=iterations)
    report = BenchmarkReport(datasets=list(result.dataset_names), seeds=list(result.seeds))
    specs_by_label = {spec.label: spec for spec in result.specs}

    for label in result.row_labels:
        spec = specs_by_label[label]
        row = ReportRow(label=label, kind=spec.kind.value, dim=spec.dim)
        for dataset in result.dataset_names:
            row.cells[dataset] = _summarize(result, label, dataset)
        if all(not cell.failed for cell in row.cells.values()):
            row.macro_average = macro_average({name: cell.mean for name, cell in row.cells.items()}, result.dataset_names)
        report.rows.append(row)

    for dataset in result.dataset_names:
        runs_by_system = {label: result.runs_for(label, dataset) for label in result.row_labels}
        runs_by_system = {label: runs for label, runs in runs_by_system.items() if runs and result.failure_for(label, dataset) is None}
        report.significance[dataset] = significance_matrix(dataset, runs_by_system, result.gold[dataset], iterations, seed)

        report.confusion[dataset] = {}
        for label, runs in runs_by_system.items():
            matrix = sum(confusion_matrix(result.gold[dataset], run.predictions, result.num_labels[dataset]) for run in runs)
            report.confusion[dataset][label] = {"matrix": matrix.tolist(), "per_class_accuracy": _finite_or_none(per_class_accuracy(matrix))}

        if dataset in datasets:
            stats = dataset_stats(datasets[dataset])
            report.statistics[dataset] = {"train": stats.train, "dev": stats.dev, "test": stats.test, "labels": stats.num_labels, "average_length": stats.average_length, "vocabulary_size": stats.vocabulary_size}

    if reference_dataset is not None and reference_dataset in datasets:
        report.reference_dataset = reference_dataset
        for dataset in result.dataset_names:
            if dataset == reference_dataset or dataset not in datasets:
                continue
            try:
                report.chi_squared[dataset] = chi_squared_emoticons(datasets[dataset], datasets[reference_dataset]).to_dict()
            except DegenerateContingencyTableException as degenerate:
                sentibench_logger.warning("Emoticon contingency table is degenerate", dataset=dataset, reference=reference_dataset)
                report.chi_squared[dataset] = {"error": str(degenerate), "counts": degenerate.counts}

    report.dimension_trend = _dimension_trend(report.rows, result.dataset_names)
    sentibench_logger.info("Building report succeeded", rows=len(report.rows))
    return report


def _percent(value: Optional[float]) -> str:
    return "-" if value is None else f"{100 * value:.1f}"


def render_markdown(report: BenchmarkReport) -> str:
    """Renders the accuracy table (percent, best result per dataset in bold) and the supporting tables"""
    headers = ["Model", *(display_name(name) for name in report.datasets), "Macro-Avg."]
    lines = ["# Benchmark report", "", "| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    best = {dataset: _percent(report.best_mean(dataset)) for dataset in report.datasets}
    for row in report.rows:
        cells = [row.label]
        for dataset in report.datasets:
            cell = row.cells[dataset]
            if cell.failed:
                cells.append("failed")
                continue
            text = _percent(cell.mean) if len(cell.accuracies) < 2 else f"{_percent(cell.mean)} ± {_percent(cell.std)}"
            cells.append(f"**{text}**" if _percent(cell.mean) == best[dataset] else text)
        cells.append(_percent(row.macro_average))
        lines.append("| " + " | ".join(cells) + " |")

    lines += ["", "## Significance", "", "Pairs significantly different in a majority of seed-paired runs (p < 0.01):", ""]
    for dataset, matrix in report.significance.items():
        significant = [f"{a} vs {b}" for (a, b), entry in sorted(matrix.entries.items()) if entry.verdict]
        lines.append(f"- {display_name(dataset)}: {', '.join(significant) if significant else 'none'}")

    if report.reference_dataset is not None:
        lines += ["", f"## Emoticon distribution against {display_name(report.reference_dataset)}", "", "| Dataset | chi2 | df | p |", "|---|---|---|---|"]
        for dataset, entry in report.chi_squared.items():
            if "error" in entry:
                lines.append(f"| {display_name(dataset)} | degenerate | - | - |")
            else:
                lines.append(f"| {display_name(dataset)} | {entry['chi2']:.3f} | {entry['df']} | {entry['p']:.3f} |")

    lines += ["", "## Datasets", "", "| Dataset | Labels | Train | Dev | Test | Avg. length | Vocabulary |", "|---|---|---|---|---|---|---|"]
    for dataset, stats in report.statistics.items():
        lines.append(f"| {display_name(dataset)} | {stats['labels']} | {stats['train']} | {stats['dev']} | {stats['test']} | {stats['average_length']:.2f} | {stats['vocabulary_size']} |")
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, fieldnames: List[str], rows: List[Dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, "") for key in fieldnames})


def _write_json(path: Path, document: Any) -> None:
    path.write_text(json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def strip_timestamps(document: Any) -> Any:
    """Removes every generated_at entry, recursively"""
    if isinstance(document, dict):
        return {key: strip_timestamps(value) for key, value in document.items() if key != TIMESTAMP_KEY}
    if isinstance(document, list):
        return [strip_timestamps(value) for value in document]
    return document


def write_manifest(out_dir: Union[str, Path], manifest: Mapping[str, Any], filename: str = "manifest.json") -> Path:
    """Writes the manifest next to the artifacts of a command"""
    path = Path(out_dir) / filename
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, {**manifest, TIMESTAMP_KEY: _timestamp()})
    return path


def write_report(report: BenchmarkReport, out_dir: Union[str, Path], manifest: Optional[Mapping[str, Any]] = None) -> List[Path]:
    """Writes the report as JSON, CSV, markdown, plot data and per-cell confusion matrices

    Returns:
        List[Path]: The written files
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest or {})
    written = []

    _write_json(directory / "report.json", {**report.to_dict(), "manifest": manifest, TIMESTAMP_KEY: _timestamp()})
    written.append(directory / "report.json")

    table_rows = []
    for row in report.rows:
        for dataset, cell in row.cells.items():
            table_rows.append({"model": row.label, "kind": row.kind, "dim": row.dim, "dataset": dataset, "runs": len(cell.accuracies), "mean": cell.mean, "std": cell.std, "failed": cell.failed})
    _write_csv(directory / "report.csv", ["model", "kind", "dim", "dataset", "runs", "mean", "std", "failed"], table_rows)
    _write_csv(directory / "plot_data.csv", ["model", "kind", "dim", "dataset", "mean", "std"], [row for row in table_rows if not row["failed"]])
    written += [directory / "report.csv", directory / "plot_data.csv"]

    (directory / "report.md").write_text(render_markdown(report), encoding="utf-8")
    written.append(directory / "report.md")

    for dataset, matrices in report.confusion.items():
        for label, entry in matrices.items():
            path = directory / "confusion" / f"{label}__{dataset}.csv"
            size = len(entry["matrix"])
            _write_csv(path, ["gold", *(str(index) for index in range(size))], [{"gold": gold, **{str(index): count for index, count in enumerate(counts)}} for gold, counts in enumerate(entry["matrix"])])
            written.append(path)

    written.append(write_manifest(directory, manifest))
    sentibench_logger.info("Writing report succeeded", out_dir=str(directory), files=len(written))
    return written
