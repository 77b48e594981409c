"""
Embedding matrices, label assignments and prediction matrices, with their file formats.

Three CSV layouts are supported (``id,f0..f{D-1}``, ``id,label`` and ``id,p0..p{c-1}``), plus the EMB1 binary
format: the 4-byte magic ``EMB1``, unsigned 32-bit little-endian N and D, then N*D little-endian float32 values in
row-major order. Ids are implicit in the binary format and always ``0..N-1``.

Row numbers in error messages count data rows from 1 (the header is not counted); column numbers count CSV
fields from 1, the id being field 1.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ssl_label_selection.errors import BadMagic, DimensionMismatch, DuplicateId, EmptyMatrix, InvalidId, \
    IoFailure, MissingHeader, MissingLabel, NegativeLabel, NegativeProbability, NonContiguousIds, NonFiniteValue, \
    RaggedRow, RowNotNormalized, TooFewClasses, TrailingBytes, TruncatedFile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MAGIC = b'EMB1'
HEADER_BYTES = len(MAGIC) + 8
CSV_FLOAT_FORMAT = '%.9g'
NORMALIZATION_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """
    N samples embedded in a D-dimensional feature space.

    :param ids: the N unique, non-negative sample identifiers
    :param data: an N x D array of finite real numbers. Floating dtypes are kept as they are, anything else is
                 converted to float64
    """

    ids: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise EmptyMatrix(data.shape)
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        if len(ids) != data.shape[0]:
            raise DimensionMismatch(f'{len(ids)} ids for {data.shape[0]} rows')
        non_finite = np.argwhere(~np.isfinite(data))
        if len(non_finite):
            row, col = non_finite[0]
            raise NonFiniteValue(int(row) + 1, int(col) + 2)
        negative = np.flatnonzero(ids < 0)
        if len(negative):
            raise InvalidId(int(negative[0]) + 1, str(ids[negative[0]]))
        _check_duplicates(ids)
        data.flags.writeable = False
        ids.flags.writeable = False
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'ids', ids)

    @property
    def n(self) -> int:
        """
        Number of samples.
        """
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        """
        Dimension of the feature space.
        """
        return self.data.shape[1]

    @property
    def has_contiguous_ids(self) -> bool:
        """
        True when the ids are exactly ``0..N-1`` in row order, the only layout the binary format can store.
        """
        return bool(np.array_equal(self.ids, np.arange(self.n)))

    def subset(self, positions: Sequence[int]) -> 'EmbeddingMatrix':
        """
        The rows at the given positions, keeping their ids.
        """
        positions = np.asarray(positions, dtype=np.int64)
        return EmbeddingMatrix(self.ids[positions], self.data[positions])

    def positions_of(self, ids: Iterable[int]) -> np.ndarray:
        """
        Row positions of the given sample ids.
        """
        index = {int(sample_id): position for position, sample_id in enumerate(self.ids)}
        return np.array([index[int(sample_id)] for sample_id in ids], dtype=np.int64)

    def equals(self, other: 'EmbeddingMatrix') -> bool:
        """
        Bitwise equality of ids and values.
        """
        return (
                np.array_equal(self.ids, other.ids)
                and self.data.shape == other.data.shape
                and self.data.astype(np.float64).tobytes() == other.data.astype(np.float64).tobytes()
        )


@dataclass(frozen=True)
class LabelAssignment:
    """
    Class labels of (some) samples.

    :param labels: a map sample id -> class index in [0, classes)
    :param classes: the number of classes, at least 2
    """

    labels: Dict[int, int]
    classes: int

    def __post_init__(self):
        if self.classes < 2:
            raise TooFewClasses(self.classes)
        for row, (sample_id, label) in enumerate(self.labels.items(), start=1):
            if label < 0:
                raise NegativeLabel(row, label)
            if label >= self.classes:
                raise DimensionMismatch(f'label {label} of sample {sample_id} is not below {self.classes} classes')

    @classmethod
    def from_arrays(cls, ids: Sequence[int], labels: Sequence[int], classes: Optional[int] = None) \
            -> 'LabelAssignment':
        """
        Builds an assignment from parallel sequences of ids and labels.

        :param ids: sample ids
        :param labels: class indices, one per id
        :param classes: the number of classes; when omitted, one more than the largest label
        """
        mapping = {}
        for sample_id, label in zip(ids, labels):
            if int(sample_id) in mapping:
                raise DuplicateId(int(sample_id))
            mapping[int(sample_id)] = int(label)
        if classes is None:
            classes = 1 + max(mapping.values(), default=-1)
        return cls(mapping, int(classes))

    def label_of(self, sample_id: int) -> int:
        try:
            return self.labels[int(sample_id)]
        except KeyError:
            raise MissingLabel(int(sample_id)) from None

    def labels_for(self, ids: Iterable[int]) -> np.ndarray:
        """
        The labels of the given sample ids, as an integer array. Raises :class:`~errors.MissingLabel` if any
        id is unlabelled.
        """
        return np.array([self.label_of(sample_id) for sample_id in ids], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """
    Per-sample class probabilities, typically the final predictions of a pre-trained model.

    :param ids: the N sample ids
    :param probs: an N x c array whose rows are probability vectors
    """

    ids: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        if probs.ndim != 2 or probs.shape[0] != len(ids):
            raise DimensionMismatch(f'{len(ids)} ids for a probability array of shape {probs.shape}')
        _check_probability_rows(probs)
        _check_duplicates(ids)
        probs.flags.writeable = False
        ids.flags.writeable = False
        object.__setattr__(self, 'probs', probs)
        object.__setattr__(self, 'ids', ids)

    @property
    def classes(self) -> int:
        return self.probs.shape[1]

    def row_index(self) -> Dict[int, int]:
        """
        A map sample id -> row position.
        """
        return {int(sample_id): row for row, sample_id in enumerate(self.ids)}


def embeddings_to_dataframe(m: EmbeddingMatrix) -> pd.DataFrame:
    """
    A utility function to convert an :class:`EmbeddingMatrix` to a pandas dataframe with columns
    ``id, f0, ..., f{D-1}``.
    """
    frame = pd.DataFrame(m.data, columns=_feature_columns('f', m.dim))
    frame.insert(0, 'id', m.ids)
    return frame


def dataframe_to_embeddings(data_frame: pd.DataFrame) -> EmbeddingMatrix:
    """
    A utility function to convert a dataframe with an ``id`` column and feature columns to an
    :class:`EmbeddingMatrix`. Feature columns keep their order.
    """
    features = data_frame.drop(columns='id')
    return EmbeddingMatrix(data_frame['id'].to_numpy(), features.to_numpy())


def read_embeddings_csv(path: PathLike) -> EmbeddingMatrix:
    """
    Reads an embedding matrix from a CSV file with header ``id,f0,...,f{D-1}``. Rows keep the file order.

    :param path: the CSV file
    :return: the embedding matrix, with float64 values
    """
    header, body = read_table(path)
    dim = len(header) - 1
    if dim < 1 or header != ['id'] + _feature_columns('f', dim):
        raise MissingHeader('id,f0,...,f{D-1}', ','.join(header))
    ids = _parse_ids(body)
    values = _parse_reals(body, range(1, dim + 1))
    frame = pd.DataFrame(values, columns=_feature_columns('f', dim))
    frame.insert(0, 'id', ids)
    matrix = dataframe_to_embeddings(frame)
    logger.debug('read %d x %d embeddings from %s', matrix.n, matrix.dim, path)
    return matrix


def write_embeddings_csv(m: EmbeddingMatrix, path: PathLike, comment: Optional[str] = None):
    """
    Writes an embedding matrix as CSV, with values at 9 significant digits (enough to round-trip float32).

    :param m: the matrix
    :param path: the destination file
    :param comment: an optional single line, written first and prefixed by ``#``
    """
    write_frame(embeddings_to_dataframe(m), path, comment, CSV_FLOAT_FORMAT)


def embeddings_to_bytes(m: EmbeddingMatrix) -> bytes:
    """
    The EMB1 serialization of a matrix with contiguous ids.
    """
    if not m.has_contiguous_ids:
        raise NonContiguousIds()
    shape = np.array([m.n, m.dim], dtype='<u4')
    return MAGIC + shape.tobytes() + np.ascontiguousarray(m.data, dtype='<f4').tobytes()


def write_embeddings_bin(m: EmbeddingMatrix, path: PathLike):
    """
    Writes a matrix in the EMB1 binary format. Values are stored as float32.

    :param m: the matrix; its ids must be ``0..N-1``
    :param path: the destination file
    """
    payload = embeddings_to_bytes(m)
    try:
        Path(path).write_bytes(payload)
    except OSError as err:
        raise IoFailure(path, err.strerror or str(err)) from err
    logger.debug('wrote %d bytes to %s', len(payload), path)


def read_embeddings_bin(path: PathLike) -> EmbeddingMatrix:
    """
    Reads a matrix from an EMB1 file. Values come back as float32, bit for bit as written.

    :param path: the EMB1 file
    :return: the embedding matrix, with ids ``0..N-1``
    """
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC[:len(raw)]:
        raise BadMagic(raw[:len(MAGIC)])
    if len(raw) < HEADER_BYTES:
        raise TruncatedFile(HEADER_BYTES, len(raw))
    n, dim = (int(v) for v in np.frombuffer(raw, dtype='<u4', count=2, offset=len(MAGIC)))
    expected = HEADER_BYTES + 4 * n * dim
    if len(raw) < expected:
        raise TruncatedFile(expected, len(raw))
    if len(raw) > expected:
        raise TrailingBytes(expected, len(raw))
    data = np.frombuffer(raw, dtype='<f4', count=n * dim, offset=HEADER_BYTES).reshape(n, dim)
    return EmbeddingMatrix(np.arange(n), data.astype(np.float32))


def read_labels(path: PathLike, classes: Optional[int] = None) -> LabelAssignment:
    """
    Reads class labels from a CSV file with header ``id,label``.

    :param path: the CSV file
    :param classes: the number of classes; when omitted, one more than the largest label seen
    :return: the label assignment
    """
    header, body = read_table(path)
    if header != ['id', 'label']:
        raise MissingHeader('id,label', ','.join(header))
    ids = _parse_ids(body)
    labels = []
    for row, text in enumerate(body[1], start=1):
        if not re.fullmatch(r'[+-]?\d+', text.strip()):
            raise NonFiniteValue(row, 2)
        label = int(text)
        if label < 0:
            raise NegativeLabel(row, label)
        labels.append(label)
    return LabelAssignment.from_arrays(ids, labels, classes)


def write_labels(labels: LabelAssignment, path: PathLike, comment: Optional[str] = None):
    """
    Writes a label assignment as an ``id,label`` CSV file, ids in ascending order.
    """
    frame = pd.DataFrame(sorted(labels.labels.items()), columns=['id', 'label'])
    write_frame(frame, path, comment)


def read_predictions(path: PathLike) -> PredictionMatrix:
    """
    Reads class probabilities from a CSV file with header ``id,p0,...,p{c-1}``. Rows whose sum differs from 1 by
    at most 1e-5 are renormalized, any other row is rejected.

    :param path: the CSV file
    :return: the prediction matrix
    """
    header, body = read_table(path)
    classes = len(header) - 1
    if classes < 1 or header != ['id'] + _feature_columns('p', classes):
        raise MissingHeader('id,p0,...,p{c-1}', ','.join(header))
    ids = _parse_ids(body)
    probs = _parse_reals(body, range(1, classes + 1))
    return PredictionMatrix(ids, _check_probability_rows(probs))


def write_predictions(predictions: PredictionMatrix, path: PathLike, comment: Optional[str] = None):
    """
    Writes a prediction matrix as CSV, with values at 9 significant digits.
    """
    frame = pd.DataFrame(predictions.probs, columns=_feature_columns('p', predictions.classes))
    frame.insert(0, 'id', predictions.ids)
    write_frame(frame, path, comment, CSV_FLOAT_FORMAT)


def _check_probability_rows(probs: np.ndarray) -> np.ndarray:
    negative = np.argwhere(probs < 0)
    if len(negative):
        row, col = negative[0]
        raise NegativeProbability(int(row) + 1, int(col) + 2)
    totals = probs.sum(axis=1)
    off = np.flatnonzero(np.abs(totals - 1) > NORMALIZATION_TOLERANCE)
    if len(off):
        raise RowNotNormalized(int(off[0]) + 1, float(totals[off[0]]))
    return probs / totals[:, np.newaxis]


def _feature_columns(prefix: str, count: int) -> List[str]:
    return [f'{prefix}{j}' for j in range(count)]


def read_table(path: PathLike) -> Tuple[List[str], pd.DataFrame]:
    """
    Reads a CSV file as strings: returns the header fields and one row of string fields per data row.
    Lines starting with '#' are skipped. Rows with missing or extra fields raise :class:`~errors.RaggedRow`.
    """
    try:
        header = list(pd.read_csv(path, nrows=0, comment='#', dtype=str).columns)
    except pd.errors.EmptyDataError:
        raise MissingHeader('a header row') from None
    width = len(header)
    try:
        body = pd.read_csv(
            path, header=None, names=list(range(width + 1)), comment='#', dtype=str, keep_default_na=False,
            skip_blank_lines=True
        )
    except pd.errors.ParserError as err:
        line = re.search(r'line (\d+)', str(err))
        raise RaggedRow(int(line.group(1)) - 1 if line else -1) from err
    body = body.iloc[1:].reset_index(drop=True)
    body.index += 1
    missing = body.isna() | body.eq('')
    ragged = missing.loc[:, :width - 1].any(axis=1) | ~missing[width]
    if ragged.any():
        raise RaggedRow(int(ragged.idxmax()))
    return header, body.loc[:, :width - 1]


def _parse_ids(body: pd.DataFrame) -> np.ndarray:
    valid = body[0].str.strip().str.fullmatch(r'\+?\d+')
    if not valid.all():
        row = int(valid.idxmin())
        raise InvalidId(row, body.at[row, 0])
    return body[0].astype(np.int64).to_numpy()


def _parse_reals(body: pd.DataFrame, columns: Iterable[int]) -> np.ndarray:
    columns = list(columns)
    values = body[columns].apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        row, col = bad[0]
        raise NonFiniteValue(int(row) + 1, columns[col] + 1)
    return values


def _check_duplicates(ids: np.ndarray):
    duplicated = pd.Series(ids).duplicated()
    if duplicated.any():
        raise DuplicateId(int(ids[duplicated.to_numpy().argmax()]))


def write_frame(frame: pd.DataFrame, path: PathLike, comment: Optional[str] = None,
                 float_format: Optional[str] = None):
    try:
        with open(path, 'w', newline='') as handle:
            if comment is not None:
                handle.write(f'# {comment}\n')
            frame.to_csv(handle, index=False, float_format=float_format)
    except OSError as err:
        raise IoFailure(path, err.strerror or str(err)) from err


def write_text(path: PathLike, text: str):
    try:
        Path(path).write_text(text)
    except OSError as err:
        raise IoFailure(path, err.strerror or str(err)) from err


def make_dir(path: PathLike) -> Path:
    """
    Creates a directory and its parents when missing.
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise IoFailure(path, err.strerror or str(err)) from err
    return path
