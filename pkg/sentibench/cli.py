"""Command-line entry point: embedding training, retrofitting, joint training, benchmarks and reports"""
import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

from sqlmodel import Session

from sentibench import __version__
from sentibench.config import BenchConfig, build_manifest, build_specs, config_hash, config_help, load_datasets, parse_config, resolve_path, validate_paths
from sentibench.data import load_dataset, tokenize
from sentibench.embeddings import SkipgramConfig, load_embeddings, save_embeddings, train_skipgram
from sentibench.evaluation.benchmark import BenchmarkResult, run_benchmark
from sentibench.evaluation.emoticons import chi_squared_emoticons
from sentibench.evaluation.report import TIMESTAMP_KEY, build_report, write_manifest, write_report
from sentibench.evaluation.significance import DEFAULT_ITERATIONS, significance_matrix
from sentibench.exceptions import ConfigException, SentiBenchException
from sentibench.joint import JointConfig, load_distant_corpus, train_joint
from sentibench.logger import sentibench_logger
from sentibench.retrofit import RetrofitConfig, load_lexicon, retrofit_embeddings
from sentibench.store import RUN_STORE_FILENAME, RunRecordRepository, open_run_store

RUNS_FILENAME = "runs.json"
SIGNIFICANCE_FILENAME = "significance.json"


def _arguments_hash(arguments: Mapping[str, Any]) -> str:
    canonical = json.dumps({key: str(value) for key, value in arguments.items() if key != "handler"}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _file_manifest(args: argparse.Namespace, seeds: Sequence[int]) -> Dict[str, Any]:
    arguments = vars(args)
    return {"command": args.command, "config_hash": _arguments_hash(arguments), "seeds": list(seeds), "version": __version__, "arguments": {key: str(value) for key, value in sorted(arguments.items()) if key != "handler"}}


def _write_file_manifest(out: Path, args: argparse.Namespace, seeds: Sequence[int]) -> None:
    write_manifest(out.parent, _file_manifest(args, seeds), filename=f"{out.name}.manifest.json")


def _require_files(*paths: Path) -> None:
    for path in paths:
        if not path.exists():
            raise ConfigException(f"{path} does not exist")


def _train_embeddings(args: argparse.Namespace) -> int:
    corpus_path = Path(args.corpus)
    _require_files(corpus_path)
    config = SkipgramConfig(dim=args.dim, window=args.window, iterations=args.iters, min_count=args.min_count, subsample=args.subsample, seed=args.seed, workers=args.jobs)
    if args.dry_run:
        return 0
    with corpus_path.open("r", encoding="utf-8") as handle:
        corpus = [tokens for tokens in (tokenize(line) for line in handle) if tokens]
    matrix = train_skipgram(corpus, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(matrix, out)
    _write_file_manifest(out, args, [args.seed])
    return 0


def _retrofit(args: argparse.Namespace) -> int:
    _require_files(Path(args.embeddings), Path(args.lexicon))
    config = RetrofitConfig(iterations=args.iters)
    if args.dry_run:
        return 0
    matrix = load_embeddings(args.embeddings)
    retrofitted = retrofit_embeddings(matrix, load_lexicon(args.lexicon, matrix.vocab), config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(retrofitted, out)
    _write_file_manifest(out, args, [])
    return 0


def _train_joint(args: argparse.Namespace) -> int:
    _require_files(Path(args.corpus))
    config = JointConfig(dim=args.dim, epochs=args.epochs, alpha=args.alpha, seed=args.seed)
    if args.dry_run:
        return 0
    matrix = train_joint(load_distant_corpus(args.corpus), config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(matrix, out)
    _write_file_manifest(out, args, [args.seed])
    return 0


def _load_config(args: argparse.Namespace) -> BenchConfig:
    if not args.config:
        raise ConfigException("--config is required for this command")
    config = parse_config(args.config)
    validate_paths(config, Path(args.config).parent)
    return config


def _out_dir(args: argparse.Namespace, config: Optional[BenchConfig] = None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None:
        return resolve_path(config.output_dir, Path(args.config).parent)
    raise ConfigException("--out is required for this command")


def _benchmark(args: argparse.Namespace) -> int:
    config = _load_config(args)
    config_dir = Path(args.config).parent
    specs = build_specs(config, config_dir)
    if args.dry_run:
        sentibench_logger.info("Configuration is valid", specs=len(specs), datasets=len(config.datasets), seeds=config.seeds)
        return 0

    datasets = load_datasets(config, config_dir)
    out_dir = _out_dir(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    engine = open_run_store(out_dir / RUN_STORE_FILENAME)
    with Session(engine) as session:
        repository = RunRecordRepository(session)
        if not args.resume:
            repository.delete_batch(repository.find(config_hash=digest))
        result = run_benchmark(specs, datasets, config.seeds, args.jobs or config.jobs, config.tune, repository, digest, args.resume)

    significance_seed = args.seed if args.seed is not None else config.significance_seed
    manifest = {**build_manifest(config, "benchmark", __version__), "significance_seed": significance_seed}
    (out_dir / RUNS_FILENAME).write_text(json.dumps({**result.to_dict(), "manifest": manifest}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    report = build_report(result, datasets, config.significance_iterations, significance_seed, config.reference_dataset)
    write_report(report, out_dir, manifest)
    return 1 if result.failures and not result.runs else 0


def _read_runs(path: Path) -> BenchmarkResult:
    _require_files(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as decode_error:
        raise ConfigException(f"{path} is not a JSON document: {decode_error}") from decode_error
    return BenchmarkResult.from_dict(document)


def _runs_path(args: argparse.Namespace) -> Path:
    if args.runs:
        return Path(args.runs)
    return _out_dir(args) / RUNS_FILENAME


def _significance(args: argparse.Namespace) -> int:
    result = _read_runs(_runs_path(args))
    if args.dry_run:
        return 0
    seed = args.seed if args.seed is not None else 1
    matrices = {}
    for dataset in result.dataset_names:
        runs_by_system = {label: result.runs_for(label, dataset) for label in result.row_labels}
        matrices[dataset] = significance_matrix(dataset, {label: runs for label, runs in runs_by_system.items() if runs}, result.gold[dataset], args.iterations, seed)
    for dataset, matrix in matrices.items():
        for (system_a, system_b), entry in sorted(matrix.entries.items()):
            print(f"{dataset}\t{system_a}\t{system_b}\t{'significant' if entry.verdict else 'not-significant'}\t{','.join(f'{p:.6g}' for p in entry.p_values)}")

    out_dir = _out_dir(args) if args.out else _runs_path(args).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    document = {dataset: matrix.to_dict() for dataset, matrix in matrices.items()}
    (out_dir / SIGNIFICANCE_FILENAME).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(out_dir, {"command": "significance", "config_hash": _arguments_hash(vars(args)), "seeds": list(result.seeds), "version": __version__, "iterations": args.iterations, "significance_seed": seed})
    return 0


def _chi2(args: argparse.Namespace) -> int:
    _require_files(Path(args.a), Path(args.b))
    if args.dry_run:
        return 0
    result = chi_squared_emoticons(load_dataset(args.a), load_dataset(args.b))
    print(f"{result.statistic:.6f}\t{result.df}\t{result.p_value:.6g}")
    return 0


def _report(args: argparse.Namespace) -> int:
    config = _load_config(args) if args.config else None
    result = _read_runs(_runs_path(args))
    if args.dry_run:
        return 0
    datasets = load_datasets(config, Path(args.config).parent) if config is not None else {}
    iterations = config.significance_iterations if config is not None else DEFAULT_ITERATIONS
    seed = args.seed if args.seed is not None else (config.significance_seed if config is not None else 1)
    reference = config.reference_dataset if config is not None else None
    report = build_report(result, datasets, iterations, seed, reference)
    manifest = build_manifest(config, "report", __version__) if config is not None else {"command": "report", "config_hash": _arguments_hash(vars(args)), "seeds": list(result.seeds), "version": __version__}
    manifest["significance_seed"] = seed
    write_report(report, _out_dir(args, config), manifest)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="benchmark configuration file (flat key = value)")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes [from config, else 1]")
    parser.add_argument("--seed", type=int, default=None, help="random seed of the command")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs and configuration without computing")
    parser.add_argument("--resume", action="store_true", help="skip benchmark runs already stored in the output directory")


def build_parser() -> argparse.ArgumentParser:
    """Creates the argument parser with one subcommand per pipeline"""
    parser = argparse.ArgumentParser(prog="sentibench", description="Sentiment classification benchmark")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def _subcommand(name: str, handler: Callable[[argparse.Namespace], int], description: str, epilog: Optional[str] = None) -> argparse.ArgumentParser:
        subparser = subparsers.add_parser(name, help=description, description=description, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(subparser)
        subparser.set_defaults(handler=handler)
        return subparser

    embeddings = _subcommand("train-embeddings", _train_embeddings, "train skip-gram embeddings on a text corpus, one text per line")
    embeddings.add_argument("--corpus", required=True)
    embeddings.add_argument("--dim", type=int, default=100)
    embeddings.add_argument("--window", type=int, default=10)
    embeddings.add_argument("--iters", type=int, default=5)
    embeddings.add_argument("--min-count", type=int, default=5)
    embeddings.add_argument("--subsample", type=float, default=1e-4)
    embeddings.set_defaults(seed=1, jobs=1)

    retrofit = _subcommand("retrofit", _retrofit, "retrofit embeddings to a lexicon")
    retrofit.add_argument("--embeddings", required=True)
    retrofit.add_argument("--lexicon", required=True)
    retrofit.add_argument("--iters", type=int, default=10)

    joint = _subcommand("train-joint", _train_joint, "train joint sentiment embeddings on a distantly labeled corpus")
    joint.add_argument("--corpus", required=True)
    joint.add_argument("--dim", type=int, default=50)
    joint.add_argument("--epochs", type=int, default=5)
    joint.add_argument("--alpha", type=float, default=0.5)
    joint.set_defaults(seed=1)

    _subcommand("benchmark", _benchmark, "train every configured model on every configured dataset and write the report", epilog=config_help())

    significance = _subcommand("significance", _significance, "test every pair of systems of a benchmark for significance")
    significance.add_argument("--runs", help=f"{RUNS_FILENAME} of a benchmark [<out>/{RUNS_FILENAME}]")
    significance.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS)

    chi2 = _subcommand("chi2", _chi2, "compare the emoticon distributions of two dataset directories")
    chi2.add_argument("--a", required=True)
    chi2.add_argument("--b", required=True)

    report = _subcommand("report", _report, "rebuild the report of a benchmark from its stored runs")
    report.add_argument("--runs", help=f"{RUNS_FILENAME} of a benchmark [<out>/{RUNS_FILENAME}]")
    return parser


def execute(argv: Optional[List[str]] = None) -> int:
    """Runs one subcommand

    Args:
        argv (Optional[List[str]]): The arguments without the program name. Defaults to sys.argv[1:].

    Returns:
        int: 0 on success, nonzero after printing a diagnostic to standard error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as system_exit:
        return int(system_exit.code or 0)
    sentibench_logger.info("Executing command", command=args.command, dry_run=args.dry_run)
    try:
        status = args.handler(args)
    except SentiBenchException as exception:
        print(f"sentibench {args.command}: error: {exception}", file=sys.stderr)
        return 1
    sentibench_logger.info("Executing command succeeded", command=args.command, status=status)
    return status


def main() -> None:
    sys.exit(execute())


__all__ = ["TIMESTAMP_KEY", "build_parser", "execute", "main"]
