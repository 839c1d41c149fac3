from typing import Mapping, Optional


class SentiBenchException(Exception):
    """Base exception for all sentibench exceptions"""


class DatasetLoadException(SentiBenchException):
    """Exception raised when a dataset file cannot be parsed"""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = f"{path}:{line_number}: " if path is not None and line_number is not None else ""
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_number = line_number


class InvalidDatasetException(SentiBenchException):
    """Exception raised when a dataset split violates its invariants (empty partition, foreign label)"""


class LabelSchemeException(SentiBenchException):
    """Exception raised when a label scheme is malformed or does not fit the requested operation"""


class EmptyVocabularyException(SentiBenchException):
    """Exception raised when a vocabulary ends up without any word"""


class EmbeddingFormatException(SentiBenchException):
    """Exception raised when an embedding file is malformed"""


class VocabularyMismatchException(SentiBenchException):
    """Exception raised when two vocabulary-indexed objects do not cover the same words"""


class LexiconFormatException(SentiBenchException):
    """Exception raised when a lexicon line cannot be read"""


class ShapeMismatchException(SentiBenchException):
    """Exception raised when array shapes do not conform"""


class InvalidHyperparameterException(SentiBenchException):
    """Exception raised when a hyperparameter is outside of its valid range"""


class TrainingDivergedException(SentiBenchException):
    """Exception raised when an objective turns non-finite during training"""


class ModelSpecException(SentiBenchException):
    """Exception raised when a model specification is inconsistent with its kind"""


class CheckpointFormatException(SentiBenchException):
    """Exception raised when a checkpoint file cannot be read"""


class MetricInputException(SentiBenchException):
    """Exception raised when metric inputs are empty, misaligned or out of range"""


class RunCountMismatchException(SentiBenchException):
    """Exception raised when two systems are compared with different numbers of runs"""


class DegenerateContingencyTableException(SentiBenchException):
    """Exception raised when a contingency table has no usable counts"""

    def __init__(self, message: str, counts: Mapping[str, Mapping[str, int]]):
        super().__init__(f"{message}: {dict(counts)}")
        self.counts = counts


class ConfigException(SentiBenchException):
    """Exception raised when a benchmark configuration is invalid"""

    def __init__(self, message: str, key: Optional[str] = None, line_number: Optional[int] = None):
        location = f"line {line_number}: " if line_number is not None else ""
        subject = f"'{key}': " if key is not None else ""
        super().__init__(f"{location}{subject}{message}")
        self.key = key
        self.line_number = line_number


class CouldNotStoreRunException(SentiBenchException):
    """Exception raised when a run could not be stored"""


class RecordDoesNotPossessAttributeException(SentiBenchException):
    """Exception raised when a stored record does not possess an attribute"""
