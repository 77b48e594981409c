"""
Exceptions raised by the package. All of them derive from :class:`LabelSelectionError`, which is itself a
``ValueError``: invalid inputs and violated contracts are reported the same way parameter validation is.
"""
from typing import Optional


class LabelSelectionError(ValueError):
    """
    Base class of every error raised by this package.
    """


class MissingHeader(LabelSelectionError):
    def __init__(self, expected: str, found: Optional[str] = None):
        self.expected = expected
        self.found = found
        super().__init__(f'missing or malformed header: expected "{expected}", found "{found}"')


class RaggedRow(LabelSelectionError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f'row {row} has a wrong number of fields')


class NonFiniteValue(LabelSelectionError):
    def __init__(self, row: Optional[int] = None, col: Optional[int] = None):
        self.row = row
        self.col = col
        where = f' at row {row}, column {col}' if row is not None else ''
        super().__init__(f'non-finite or unparseable value{where}')


class DuplicateId(LabelSelectionError):
    def __init__(self, sample_id: int):
        self.sample_id = sample_id
        super().__init__(f'duplicate sample id {sample_id}')


class InvalidId(LabelSelectionError):
    def __init__(self, row: int, value: str):
        self.row = row
        self.value = value
        super().__init__(f'row {row}: sample id must be a non-negative integer, got "{value}"')


class EmptyMatrix(LabelSelectionError):
    def __init__(self, shape):
        self.shape = tuple(shape)
        super().__init__(f'an embedding matrix needs at least one row and one column, got shape {self.shape}')


class BadMagic(LabelSelectionError):
    def __init__(self, found: bytes):
        self.found = found
        super().__init__(f'not an EMB1 file (magic {found!r})')


class TruncatedFile(LabelSelectionError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f'truncated file: expected {expected} bytes, found {actual}')


class TrailingBytes(LabelSelectionError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f'unexpected trailing data: expected {expected} bytes, found {actual}')


class NonContiguousIds(LabelSelectionError):
    def __init__(self):
        super().__init__('the binary format stores ids implicitly: ids must be 0..N-1 in order')


class IoFailure(LabelSelectionError):
    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f'cannot write {self.path}: {reason}')


class NegativeLabel(LabelSelectionError):
    def __init__(self, row: int, label: int):
        self.row = row
        self.label = label
        super().__init__(f'row {row}: negative label {label}')


class TooFewClasses(LabelSelectionError):
    def __init__(self, classes: int):
        self.classes = classes
        super().__init__(f'at least 2 classes are required, got {classes}')


class MissingLabel(LabelSelectionError):
    def __init__(self, sample_id: int):
        self.sample_id = sample_id
        super().__init__(f'no label for sample id {sample_id}')


class RowNotNormalized(LabelSelectionError):
    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f'row {row} sums to {total:.9g}, not 1')


class NegativeProbability(LabelSelectionError):
    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f'negative probability at row {row}, column {col}')


class KExceedsN(LabelSelectionError):
    def __init__(self, k: int, n: int):
        self.k = k
        self.n = n
        super().__init__(f'k must be in [1, N]: k={k}, N={n}')


class DimensionMismatch(LabelSelectionError):
    def __init__(self, message: str):
        super().__init__(f'dimension mismatch: {message}')


class UnsplittableCluster(LabelSelectionError):
    def __init__(self, clusters: int, requested: int):
        self.clusters = clusters
        self.requested = requested
        super().__init__(f'no cluster can be split further: {clusters} clusters, {requested} requested')


class NExceedsPopulation(LabelSelectionError):
    def __init__(self, n: int, population: int):
        self.n = n
        self.population = population
        super().__init__(f'cannot select {n} samples out of {population}')


class ClassTooSmall(LabelSelectionError):
    def __init__(self, label: int, quota: int, available: int):
        self.label = label
        self.quota = quota
        self.available = available
        super().__init__(f'class {label} needs {quota} samples but only {available} are available')


class NLessThanClassCount(LabelSelectionError):
    def __init__(self, n: int, classes: int):
        self.n = n
        self.classes = classes
        super().__init__(f'balanced selection needs n >= number of classes: n={n}, classes={classes}')


class NotNormalized(LabelSelectionError):
    def __init__(self, total: float):
        self.total = total
        super().__init__(f'probability vector sums to {total:.9g}, not 1')


class NegativeEntry(LabelSelectionError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f'probability vector has a negative entry at position {position}')


class MissingPrediction(LabelSelectionError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f'no prediction row for selected sample {index}')


class InvalidSpec(LabelSelectionError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f'invalid policy: {reason}')


class EpochOutOfRange(LabelSelectionError):
    def __init__(self, epoch: int, epochs: int):
        self.epoch = epoch
        self.epochs = epochs
        super().__init__(f'epoch {epoch} outside schedule of {epochs} epochs')


class ScheduleExceedsSelection(LabelSelectionError):
    def __init__(self, count: int, available: int):
        self.count = count
        self.available = available
        super().__init__(f'schedule asks for {count} labelled samples, selection has {available}')


class EmptyUnlabelledBatch(LabelSelectionError):
    def __init__(self, mode: str):
        self.mode = mode
        super().__init__(f'unsupervised mode "{mode}" needs a non-empty unlabelled batch')


class ScheduleMismatch(LabelSelectionError):
    def __init__(self, schedule_epochs: int, epochs: int):
        self.schedule_epochs = schedule_epochs
        self.epochs = epochs
        super().__init__(f'schedule covers {schedule_epochs} epochs, training runs for {epochs}')


class ConfigError(LabelSelectionError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f'configuration error: {reason}')


class TrialError(LabelSelectionError):
    """
    A trial of the benchmark harness failed; wraps the original error with the method and seed.
    """

    def __init__(self, method: str, seed: int, cause: Exception):
        self.method = method
        self.seed = seed
        self.cause = cause
        super().__init__(f'trial failed for method {method}, seed {seed}: {cause}')
