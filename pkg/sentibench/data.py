import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from sentibench.exceptions import DatasetLoadException, EmptyVocabularyException, InvalidDatasetException, LabelSchemeException, VocabularyMismatchException
from sentibench.logger import sentibench_logger

TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]", re.UNICODE)
PARTITIONS = ("train", "dev", "test")

_SCHEME_NAMES: Dict[int, Tuple[str, ...]] = {
    2: ("negative", "positive"),
    3: ("negative", "neutral", "positive"),
    4: ("strong negative", "negative", "positive", "strong positive"),
    5: ("strong negative", "negative", "neutral", "positive", "strong positive"),
}


def tokenize(text: str) -> List[str]:
    """Lowercases a text and splits it into word and punctuation tokens

    Args:
        text (str): The raw text

    Returns:
        List[str]: The tokens; empty for an empty or whitespace-only text
    """
    return TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True)
class LabelScheme:
    """Ordered label names, most negative first"""

    num_labels: int
    names: Tuple[str, ...]

    def __post_init__(self):
        if self.num_labels not in _SCHEME_NAMES:
            raise LabelSchemeException(f"Unsupported number of labels {self.num_labels}, expected one of {sorted(_SCHEME_NAMES)}")
        if len(self.names) != self.num_labels:
            raise LabelSchemeException(f"Scheme has {self.num_labels} labels but {len(self.names)} names")

    @classmethod
    def with_labels(cls, num_labels: int) -> "LabelScheme":
        """Creates the standard scheme for the given number of labels"""
        if num_labels not in _SCHEME_NAMES:
            raise LabelSchemeException(f"Unsupported number of labels {num_labels}, expected one of {sorted(_SCHEME_NAMES)}")
        return cls(num_labels=num_labels, names=_SCHEME_NAMES[num_labels])

    def __contains__(self, label: int) -> bool:
        return 0 <= label < self.num_labels


@dataclass(frozen=True)
class BenchmarkDataset:
    """Known benchmark with its display name and annotation scheme"""

    name: str
    display_name: str
    num_labels: int


BENCHMARK_DATASETS: Tuple[BenchmarkDataset, ...] = (
    BenchmarkDataset("sst_fine", "SST-fine", 5),
    BenchmarkDataset("sst_binary", "SST-binary", 2),
    BenchmarkDataset("opener", "OpeNER", 4),
    BenchmarkDataset("sentube_a", "SenTube-A", 2),
    BenchmarkDataset("sentube_t", "SenTube-T", 2),
    BenchmarkDataset("semeval", "SemEval", 3),
)
BENCHMARK_DATASET_NAMES: Tuple[str, ...] = tuple(dataset.name for dataset in BENCHMARK_DATASETS)


def display_name(dataset_name: str) -> str:
    """Returns the table name of a benchmark dataset, or the name itself for user datasets"""
    for dataset in BENCHMARK_DATASETS:
        if dataset.name == dataset_name:
            return dataset.display_name
    return dataset_name


@dataclass(frozen=True)
class LabeledExample:
    """One text with its tokens and gold label"""

    text: str
    tokens: Tuple[str, ...]
    label: int

    @classmethod
    def from_text(cls, text: str, label: int) -> "LabeledExample":
        """Tokenizes a text into a labeled example"""
        return cls(text=text, tokens=tuple(tokenize(text)), label=label)


@dataclass(frozen=True)
class DatasetSplit:
    """Train, dev and test partitions of one dataset under one label scheme"""

    name: str
    scheme: LabelScheme
    train: Tuple[LabeledExample, ...]
    dev: Tuple[LabeledExample, ...]
    test: Tuple[LabeledExample, ...]

    def __post_init__(self):
        for partition, examples in self.partitions().items():
            if not examples:
                raise InvalidDatasetException(f"Partition {partition} of dataset {self.name} is empty")
            for position, example in enumerate(examples):
                if example.label not in self.scheme:
                    raise InvalidDatasetException(f"Example {position} of {self.name}/{partition} has label {example.label} outside of the {self.scheme.num_labels}-label scheme")

    def partitions(self) -> Dict[str, Tuple[LabeledExample, ...]]:
        """Returns the partitions by name, in train/dev/test order"""
        return {"train": self.train, "dev": self.dev, "test": self.test}

    def texts(self) -> List[str]:
        """Returns all raw texts over all partitions"""
        return [example.text for examples in self.partitions().values() for example in examples]


@dataclass(frozen=True)
class DatasetStats:
    """Size and lexical statistics of a dataset"""

    name: str
    num_labels: int
    train: int
    dev: int
    test: int
    average_length: float
    vocabulary_size: int


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between words and contiguous indices, with corpus counts"""

    words: Tuple[str, ...]
    counts: Tuple[int, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.words) != len(self.counts):
            raise VocabularyMismatchException(f"Vocabulary has {len(self.words)} words but {len(self.counts)} counts")
        index = {word: position for position, word in enumerate(self.words)}
        if len(index) != len(self.words):
            raise VocabularyMismatchException("Vocabulary words must be unique")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_words(cls, words: Sequence[str]) -> "Vocabulary":
        """Creates a vocabulary that keeps the given word order and carries no counts"""
        return cls(words=tuple(words), counts=tuple(0 for _ in words))

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self._index

    def index(self, word: str) -> Optional[int]:
        """Returns the index of a word, or None if the word is out of vocabulary"""
        return self._index.get(word)

    def indices(self, tokens: Iterable[str]) -> List[int]:
        """Maps tokens to indices, dropping out-of-vocabulary tokens"""
        return [self._index[token] for token in tokens if token in self._index]

    def count(self, word: str) -> int:
        """Returns the corpus count of a word (0 when unknown)"""
        position = self._index.get(word)
        return 0 if position is None else self.counts[position]


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Builds a vocabulary ordered by descending count, ties broken lexicographically

    Args:
        corpus (Iterable[Sequence[str]]): Token sequences
        min_count (int): Minimum count for a word to be kept

    Returns:
        Vocabulary: The words with count >= min_count

    Raises:
        EmptyVocabularyException: If no word reaches min_count
    """
    if min_count < 1:
        raise EmptyVocabularyException(f"min_count must be >= 1, got {min_count}")

    counter: Counter = Counter()
    for tokens in corpus:
        counter.update(tokens)

    kept = sorted(((word, count) for word, count in counter.items() if count >= min_count), key=lambda item: (-item[1], item[0]))
    if not kept:
        raise EmptyVocabularyException(f"No word occurs at least {min_count} times")
    return Vocabulary(words=tuple(word for word, _ in kept), counts=tuple(count for _, count in kept))


def _read_partition(path: Path, scheme: Optional[LabelScheme]) -> List[LabeledExample]:
    examples = []
    with path.open("r", encoding="utf-8", newline="\n") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if "\t" not in line:
                raise DatasetLoadException("expected 'label<TAB>text'", path=str(path), line_number=line_number)
            raw_label, text = line.split("\t", 1)
            try:
                label = int(raw_label)
            except ValueError as value_error:
                raise DatasetLoadException(f"label '{raw_label}' is not a decimal integer", path=str(path), line_number=line_number) from value_error
            if scheme is not None and label not in scheme:
                raise DatasetLoadException(f"label {label} is outside of the {scheme.num_labels}-label scheme", path=str(path), line_number=line_number)
            if label < 0:
                raise DatasetLoadException(f"label {label} is negative", path=str(path), line_number=line_number)
            example = LabeledExample.from_text(text, label)
            if not example.tokens:
                raise DatasetLoadException("text is empty after tokenization", path=str(path), line_number=line_number)
            examples.append(example)
    return examples


def load_dataset(path: Union[str, Path], scheme: Optional[LabelScheme] = None, name: Optional[str] = None) -> DatasetSplit:
    """Loads a dataset directory with train.tsv, dev.tsv and test.tsv

    Args:
        path (Union[str, Path]): The dataset directory
        scheme (Optional[LabelScheme]): The label scheme. Inferred from the largest label when None.
        name (Optional[str]): The dataset name. Defaults to the directory name.

    Returns:
        DatasetSplit: The loaded split

    Raises:
        DatasetLoadException: If a file is missing or a line is malformed
        InvalidDatasetException: If a partition is empty
    """
    directory = Path(path)
    name = name if name is not None else directory.name
    sentibench_logger.debug("Loading dataset", dataset=name, path=str(directory))

    partitions = {}
    for partition in PARTITIONS:
        file_path = directory / f"{partition}.tsv"
        if not file_path.is_file():
            raise DatasetLoadException(f"Missing partition file {file_path}")
        partitions[partition] = _read_partition(file_path, scheme)

    if scheme is None:
        largest = max(example.label for examples in partitions.values() for example in examples) if any(partitions.values()) else 1
        try:
            scheme = LabelScheme.with_labels(max(2, largest + 1))
        except LabelSchemeException as scheme_exception:
            raise DatasetLoadException(f"Cannot infer a label scheme for {directory}: {scheme_exception}") from scheme_exception

    split = DatasetSplit(name=name, scheme=scheme, train=tuple(partitions["train"]), dev=tuple(partitions["dev"]), test=tuple(partitions["test"]))
    sentibench_logger.info("Loading dataset succeeded", dataset=name, train=len(split.train), dev=len(split.dev), test=len(split.test), labels=scheme.num_labels)
    return split


def save_dataset(split: DatasetSplit, path: Union[str, Path]) -> None:
    """Writes a split in the label<TAB>text directory format read by load_dataset"""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    for partition, examples in split.partitions().items():
        with (directory / f"{partition}.tsv").open("w", encoding="utf-8", newline="\n") as handle:
            for example in examples:
                handle.write(f"{example.label}\t{example.text}\n")


def sst_to_binary(fine: DatasetSplit, name: Optional[str] = None) -> DatasetSplit:
    """Maps a 5-label split to the binary scheme and drops the neutral examples

    Args:
        fine (DatasetSplit): A split under the 5-label scheme
        name (Optional[str]): Name of the binary split. Defaults to "sst_binary".

    Returns:
        DatasetSplit: Labels {0, 1} -> 0 and {3, 4} -> 1, label 2 removed

    Raises:
        LabelSchemeException: If the input does not use 5 labels
        InvalidDatasetException: If a partition has only neutral examples
    """
    if fine.scheme.num_labels != 5:
        raise LabelSchemeException(f"Binary mapping requires a 5-label scheme, got {fine.scheme.num_labels}")

    def _binarize(examples: Tuple[LabeledExample, ...]) -> Tuple[LabeledExample, ...]:
        return tuple(replace(example, label=0 if example.label < 2 else 1) for example in examples if example.label != 2)

    return DatasetSplit(
        name=name if name is not None else "sst_binary",
        scheme=LabelScheme.with_labels(2),
        train=_binarize(fine.train),
        dev=_binarize(fine.dev),
        test=_binarize(fine.test),
    )


def dataset_stats(split: DatasetSplit) -> DatasetStats:
    """Computes partition sizes, average training length and training vocabulary size"""
    lengths = [len(example.tokens) for example in split.train]
    vocabulary = {token for example in split.train for token in example.tokens}
    return DatasetStats(
        name=split.name,
        num_labels=split.scheme.num_labels,
        train=len(split.train),
        dev=len(split.dev),
        test=len(split.test),
        average_length=sum(lengths) / len(lengths),
        vocabulary_size=len(vocabulary),
    )


def benchmark_scheme(dataset_name: str) -> Optional[LabelScheme]:
    """Returns the annotation scheme of a known benchmark dataset"""
    for dataset in BENCHMARK_DATASETS:
        if dataset.name == dataset_name:
            return LabelScheme.with_labels(dataset.num_labels)
    return None


def label_counts(examples: Sequence[LabeledExample], scheme: LabelScheme) -> Mapping[int, int]:
    """Counts gold labels per class, including classes without examples"""
    counter = Counter(example.label for example in examples)
    return {label: counter.get(label, 0) for label in range(scheme.num_labels)}
