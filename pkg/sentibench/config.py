"""Flat key = value benchmark configuration

A configuration file holds one ``key = value`` pair per line; ``#`` starts a comment. List values
are comma separated. Datasets are declared as ``dataset.<name> = <directory>`` with the optional
``dataset.<name>.labels`` and ``dataset.<name>.binarize`` keys, embedding files per dimension as
``embeddings.<dim>`` and ``joint_embeddings.<dim>``.
"""
import hashlib
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError

from sentibench.data import DatasetSplit, LabelScheme, benchmark_scheme, load_dataset, sst_to_binary
from sentibench.exceptions import ConfigException, LabelSchemeException
from sentibench.logger import sentibench_logger
from sentibench.models import HIDDEN_GRID, L2_GRID, ModelKind, ModelSpec

DATA_ROOT_VARIABLE = "SENTIBENCH_DATA"
MIN_NEURAL_SEEDS = 5

LIST_KEYS = ("models", "dims", "seeds", "hidden_grid", "l2_grid")
OPTIONAL_KEYS = ("lexicon", "joint_corpus", "dataset_root", "reference_dataset")
_NONE_VALUES = ("", "none")
_DATASET_KEY = re.compile(r"^dataset\.(?P<name>[A-Za-z0-9_\-]+)(\.(?P<option>labels|binarize))?$")
_EMBEDDING_KEY = re.compile(r"^(?P<field>embeddings|joint_embeddings)\.(?P<dim>[0-9]+)$")


class DatasetConfig(BaseModel):
    """One dataset directory and its label handling"""

    name: str
    path: str
    labels: Optional[int] = None
    binarize: bool = False


class BenchConfig(BaseModel):
    """Validated benchmark configuration"""

    datasets: List[DatasetConfig] = Field(default_factory=list)
    models: List[str] = Field(default_factory=list)
    dims: List[int] = Field(default_factory=lambda: [50])
    embeddings: Dict[int, str] = Field(default_factory=dict)
    joint_embeddings: Dict[int, str] = Field(default_factory=dict)
    lexicon: Optional[str] = None
    joint_corpus: Optional[str] = None
    dataset_root: Optional[str] = None
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    output_dir: str = "results"
    jobs: int = 1
    hidden_grid: List[int] = Field(default_factory=lambda: list(HIDDEN_GRID))
    l2_grid: List[float] = Field(default_factory=lambda: list(L2_GRID))
    max_epochs: int = 30
    patience: int = 5
    batch_size: int = 32
    dropout: float = 0.5
    learning_rate: float = 0.001
    lstm_units: int = 50
    num_filters: int = 50
    retrofit_iterations: int = 10
    significance_iterations: int = 10000
    significance_seed: int = 1
    reference_dataset: Optional[str] = "semeval"
    tune: bool = True

    @property
    def model_kinds(self) -> List[ModelKind]:
        return [ModelKind(model) for model in self.models]

    @property
    def has_neural_models(self) -> bool:
        return any(kind.is_neural for kind in self.model_kinds)


SCALAR_KEYS = ("lexicon", "joint_corpus", "dataset_root", "output_dir", "jobs", "max_epochs", "patience", "batch_size", "dropout", "learning_rate", "lstm_units", "num_filters", "retrofit_iterations", "significance_iterations", "significance_seed", "reference_dataset", "tune")


def _dump(model: BaseModel) -> Dict[str, Any]:
    dump = getattr(model, "model_dump", None)
    return dump() if dump is not None else model.dict()


def _split_line(line: str, line_number: int) -> Optional[Tuple[str, str]]:
    content = line.split("#", 1)[0].strip()
    if not content:
        return None
    if "=" not in content:
        raise ConfigException("expected 'key = value'", line_number=line_number)
    key, value = (part.strip() for part in content.split("=", 1))
    if not key:
        raise ConfigException("missing key before '='", line_number=line_number)
    return key, value


def _list_value(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_config_text(text: str) -> BenchConfig:
    """Parses the text of a configuration file

    Args:
        text (str): The file content

    Returns:
        BenchConfig: The validated configuration

    Raises:
        ConfigException: For a malformed line, an unknown or duplicate key, an invalid value or a missing required key; the message names the key and line
    """
    lines: Dict[str, int] = {}
    raw: Dict[str, Any] = {}
    datasets: Dict[str, Dict[str, Any]] = {}
    field_lines: Dict[str, Tuple[str, int]] = {}

    for line_number, line in enumerate(text.splitlines(), start=1):
        entry = _split_line(line, line_number)
        if entry is None:
            continue
        key, value = entry
        if key in lines:
            raise ConfigException(f"duplicate key, first set on line {lines[key]}", key=key, line_number=line_number)
        lines[key] = line_number

        dataset_match = _DATASET_KEY.match(key)
        embedding_match = _EMBEDDING_KEY.match(key)
        if dataset_match:
            name, option = dataset_match.group("name"), dataset_match.group("option") or "path"
            datasets.setdefault(name, {"name": name})[option] = value
            field_lines.setdefault("datasets", (key, line_number))
        elif embedding_match:
            field = embedding_match.group("field")
            raw.setdefault(field, {})[int(embedding_match.group("dim"))] = value
            field_lines.setdefault(field, (key, line_number))
        elif key in LIST_KEYS:
            raw[key] = _list_value(value)
            field_lines[key] = (key, line_number)
        elif key in SCALAR_KEYS:
            raw[key] = None if key in OPTIONAL_KEYS and value.lower() in _NONE_VALUES else value
            field_lines[key] = (key, line_number)
        else:
            raise ConfigException("unknown key", key=key, line_number=line_number)

    for name, options in datasets.items():
        if "path" not in options:
            raise ConfigException(f"options given for undeclared dataset '{name}'", key=f"dataset.{name}")
    raw["datasets"] = list(datasets.values())

    try:
        config = BenchConfig(**raw)
    except ValidationError as validation_error:
        first = validation_error.errors()[0]
        field = str(first["loc"][0])
        key, line_number = field_lines.get(field, (field, None))
        raise ConfigException(f"invalid value: {first['msg']}", key=key, line_number=line_number) from validation_error

    _validate(config, field_lines)
    return config


def _validate(config: BenchConfig, field_lines: Dict[str, Tuple[str, int]]) -> None:
    def _fail(message: str, field: str) -> None:
        key, line_number = field_lines.get(field, (field, None))
        raise ConfigException(message, key=key, line_number=line_number)

    if not config.models:
        _fail("missing required key", "models")
    for model in config.models:
        if model not in {kind.value for kind in ModelKind}:
            _fail(f"unknown model kind '{model}', expected one of {[kind.value for kind in ModelKind]}", "models")
    if not config.datasets:
        raise ConfigException("missing required key, at least one dataset is needed", key="dataset.<name>")
    if not config.dims or any(dim < 1 for dim in config.dims):
        _fail("dims must list positive dimensionalities", "dims")
    if len(set(config.seeds)) != len(config.seeds) or not config.seeds:
        _fail("seeds must be a non-empty list of distinct integers", "seeds")
    if config.has_neural_models and len(config.seeds) < MIN_NEURAL_SEEDS:
        _fail(f"neural models need at least {MIN_NEURAL_SEEDS} seeds, got {len(config.seeds)}", "seeds")
    if ModelKind.RETROFIT in config.model_kinds and not config.lexicon:
        _fail("the retrofit model requires a lexicon", "lexicon")
    if ModelKind.JOINT in config.model_kinds and not config.joint_corpus and any(dim not in config.joint_embeddings for dim in config.dims):
        _fail("the joint model requires joint_corpus or joint_embeddings for every dim", "joint_corpus")
    if not config.hidden_grid or not config.l2_grid:
        _fail("hidden_grid and l2_grid must not be empty", "hidden_grid" if not config.hidden_grid else "l2_grid")
    if config.jobs < 1:
        _fail("jobs must be >= 1", "jobs")
    for dataset in config.datasets:
        if dataset.labels is not None:
            try:
                LabelScheme.with_labels(dataset.labels)
            except LabelSchemeException as scheme_exception:
                raise ConfigException(str(scheme_exception), key=f"dataset.{dataset.name}.labels") from scheme_exception


def parse_config(path: Union[str, Path]) -> BenchConfig:
    """Reads and validates a configuration file

    Raises:
        ConfigException: If the file cannot be read or is invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as os_error:
        raise ConfigException(f"cannot read configuration file {path}: {os_error}") from os_error
    config = parse_config_text(text)
    sentibench_logger.debug("Parsing config succeeded", path=str(path), models=config.models, datasets=[dataset.name for dataset in config.datasets])
    return config


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format(item) for item in value)
    if value is None:
        return "none"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(config: BenchConfig) -> str:
    """Writes the canonical flat form: datasets in declaration order, then every other key in a fixed order"""
    data = _dump(config)
    lines = []
    for dataset in config.datasets:
        lines.append(f"dataset.{dataset.name} = {dataset.path}")
        if dataset.labels is not None:
            lines.append(f"dataset.{dataset.name}.labels = {dataset.labels}")
        lines.append(f"dataset.{dataset.name}.binarize = {_format(dataset.binarize)}")
    for key in LIST_KEYS:
        lines.append(f"{key} = {_format(data[key])}")
    for field in ("embeddings", "joint_embeddings"):
        for dim in sorted(data[field]):
            lines.append(f"{field}.{dim} = {data[field][dim]}")
    for key in SCALAR_KEYS:
        lines.append(f"{key} = {_format(data[key])}")
    return "\n".join(lines) + "\n"


def config_hash(config: BenchConfig) -> str:
    """SHA-256 of the canonical serialization"""
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def config_help() -> str:
    """Lists every configuration key with its default"""
    defaults = _dump(BenchConfig())
    lines = [
        "configuration keys (key = value, '#' comments, comma-separated lists):",
        "  dataset.<name> = <directory with train.tsv, dev.tsv, test.tsv>  (at least one, required)",
        "  dataset.<name>.labels = <2..5>  [inferred for known benchmarks, else from the data]",
        "  dataset.<name>.binarize = <true|false>  [false]",
        "  embeddings.<dim> = <embedding file>  [skip-gram trained on the dataset]",
        "  joint_embeddings.<dim> = <embedding file>  [trained on joint_corpus]",
        "  models = <bow,ave,retrofit,joint,lstm,bilstm,cnn>  (required)",
    ]
    for key in (*LIST_KEYS, *SCALAR_KEYS):
        if key == "models":
            continue
        default = _format(defaults[key])
        if key == "dataset_root":
            default = f"${DATA_ROOT_VARIABLE}"
        lines.append(f"  {key}  [{default}]")
    return "\n".join(lines)


def resolve_path(raw: str, config_dir: Union[str, Path]) -> Path:
    """Resolves a relative path against the configuration file's directory"""
    path = Path(raw).expanduser()
    return path if path.is_absolute() else Path(config_dir) / path


def resolve_dataset_path(config: BenchConfig, raw: str, config_dir: Union[str, Path]) -> Path:
    """Resolves a dataset path against dataset_root, then $SENTIBENCH_DATA, then the configuration directory"""
    path = Path(raw).expanduser()
    if path.is_absolute():
        return path
    roots = [root for root in (config.dataset_root, os.environ.get(DATA_ROOT_VARIABLE)) if root]
    candidates = [resolve_path(root, config_dir) / path for root in roots] + [Path(config_dir) / path]
    for candidate in candidates:
        if candidate.exists():
            return candidate
    return candidates[0]


def validate_paths(config: BenchConfig, config_dir: Union[str, Path]) -> None:
    """Checks that every referenced file and directory exists

    Raises:
        ConfigException: Naming the key of the first missing path
    """
    for dataset in config.datasets:
        if not resolve_dataset_path(config, dataset.path, config_dir).is_dir():
            raise ConfigException(f"dataset directory {dataset.path} does not exist", key=f"dataset.{dataset.name}")
    for field in ("embeddings", "joint_embeddings"):
        for dim, raw in sorted(getattr(config, field).items()):
            if not resolve_path(raw, config_dir).is_file():
                raise ConfigException(f"embedding file {raw} does not exist", key=f"{field}.{dim}")
    for key in ("lexicon", "joint_corpus"):
        raw = getattr(config, key)
        if raw and not resolve_path(raw, config_dir).is_file():
            raise ConfigException(f"file {raw} does not exist", key=key)


def build_specs(config: BenchConfig, config_dir: Union[str, Path]) -> List[ModelSpec]:
    """Expands the model list into one spec per report row

    Notes:
        - BOW does not depend on the embedding dimensionality and yields a single row.
    """

    def _optional_path(raw: Optional[str]) -> Optional[str]:
        return str(resolve_path(raw, config_dir)) if raw else None

    common = {
        "hidden_grid": tuple(config.hidden_grid),
        "l2_grid": tuple(config.l2_grid),
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "batch_size": config.batch_size,
        "dropout": config.dropout,
        "learning_rate": config.learning_rate,
        "lstm_units": config.lstm_units,
        "num_filters": config.num_filters,
        "retrofit_iterations": config.retrofit_iterations,
        "seed": config.seeds[0],
        "hidden": min(config.hidden_grid),
    }
    specs = []
    for kind in config.model_kinds:
        if kind is ModelKind.BOW:
            specs.append(ModelSpec(kind=kind, dim=config.dims[0], **common))
            continue
        for dim in config.dims:
            if kind is ModelKind.JOINT:
                spec = ModelSpec(kind=kind, dim=dim, embeddings=_optional_path(config.joint_embeddings.get(dim)), joint_corpus=_optional_path(config.joint_corpus), **common)
            else:
                spec = ModelSpec(kind=kind, dim=dim, embeddings=_optional_path(config.embeddings.get(dim)), lexicon=_optional_path(config.lexicon), **common)
            specs.append(spec)
    return specs


def load_datasets(config: BenchConfig, config_dir: Union[str, Path]) -> Dict[str, DatasetSplit]:
    """Loads every configured dataset in declaration order

    Notes:
        - binarize loads the directory under the 5-label scheme and maps it to the binary scheme.
    """
    datasets = {}
    for dataset in config.datasets:
        path = resolve_dataset_path(config, dataset.path, config_dir)
        scheme = LabelScheme.with_labels(dataset.labels) if dataset.labels is not None else None
        if dataset.binarize:
            datasets[dataset.name] = sst_to_binary(load_dataset(path, scheme or LabelScheme.with_labels(5), name=dataset.name), name=dataset.name)
        else:
            datasets[dataset.name] = load_dataset(path, scheme or benchmark_scheme(dataset.name), name=dataset.name)
    return datasets


def build_manifest(config: BenchConfig, command: str, version: str) -> Dict[str, Any]:
    """Everything needed to rerun a command exactly"""
    return {"command": command, "config_hash": config_hash(config), "seeds": list(config.seeds), "version": version, "config": serialize_config(config)}
