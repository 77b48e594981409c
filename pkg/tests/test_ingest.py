import numpy as np
import pandas as pd
import pytest
from pytest import fixture

from ssl_label_selection.errors import BadMagic, DuplicateId, EmptyMatrix, InvalidId, MissingHeader, NegativeLabel, \
    NegativeProbability, NonContiguousIds, NonFiniteValue, RaggedRow, RowNotNormalized, TooFewClasses, \
    TrailingBytes, TruncatedFile
from ssl_label_selection.ingest import EmbeddingMatrix, LabelAssignment, PredictionMatrix, dataframe_to_embeddings, \
    embeddings_to_bytes, embeddings_to_dataframe, read_embeddings_bin, read_embeddings_csv, read_labels, \
    read_predictions, write_embeddings_bin, write_embeddings_csv, write_labels, write_predictions
from tests.utils import write_lines


@fixture
def random_matrix():
    rng = np.random.default_rng(7)
    return EmbeddingMatrix(np.arange(5), rng.standard_normal((5, 3)).astype(np.float32))


def test_read_embeddings_csv(tmp_path):
    path = write_lines(tmp_path / 'emb.csv', ['id,f0,f1', '0,1.0,2.0', '1,3.0,4.0'])
    m = read_embeddings_csv(path)
    assert (m.n, m.dim) == (2, 2)
    assert list(m.ids) == [0, 1]
    np.testing.assert_array_equal(m.data, [[1.0, 2.0], [3.0, 4.0]])


def test_read_embeddings_csv_skips_comments(tmp_path):
    path = write_lines(tmp_path / 'emb.csv', ['# {"tool": "x"}', 'id,f0', '4,1.5', '2,-0.5'])
    m = read_embeddings_csv(path)
    assert list(m.ids) == [4, 2]
    np.testing.assert_array_equal(m.data[:, 0], [1.5, -0.5])


def test_ragged_row(tmp_path):
    path = write_lines(tmp_path / 'emb.csv', ['id,f0,f1', '0,1.0,2.0', '1,3.0'])
    with pytest.raises(RaggedRow) as err:
        read_embeddings_csv(path)
    assert err.value.row == 2


def test_duplicate_id(tmp_path):
    path = write_lines(tmp_path / 'emb.csv', ['id,f0', '0,1.0', '0,2.0'])
    with pytest.raises(DuplicateId) as err:
        read_embeddings_csv(path)
    assert err.value.sample_id == 0


@pytest.mark.parametrize('value', ['nan', 'inf', 'abc'])
def test_non_finite_value(tmp_path, value):
    path = write_lines(tmp_path / 'emb.csv', ['id,f0,f1', '0,1.0,2.0', f'1,3.0,{value}'])
    with pytest.raises(NonFiniteValue) as err:
        read_embeddings_csv(path)
    assert (err.value.row, err.value.col) == (2, 3)


@pytest.mark.parametrize('value', ['-1', 'x', '1.5'])
def test_invalid_id(tmp_path, value):
    path = write_lines(tmp_path / 'emb.csv', ['id,f0', f'{value},1.0'])
    with pytest.raises(InvalidId) as err:
        read_embeddings_csv(path)
    assert err.value.row == 1


def test_missing_header(tmp_path):
    with pytest.raises(MissingHeader):
        read_embeddings_csv(write_lines(tmp_path / 'a.csv', ['idx,f0', '0,1.0']))
    (tmp_path / 'empty.csv').write_text('')
    with pytest.raises(MissingHeader):
        read_embeddings_csv(tmp_path / 'empty.csv')


def test_header_only_is_empty(tmp_path):
    with pytest.raises(EmptyMatrix):
        read_embeddings_csv(write_lines(tmp_path / 'a.csv', ['id,f0,f1']))


def test_matrix_is_read_only(random_matrix):
    with pytest.raises(ValueError):
        random_matrix.data[0, 0] = 1.0


def test_read_minimal_binary(tmp_path):
    payload = b'EMB1' + np.array([1, 2], dtype='<u4').tobytes() + np.array([0.0, 1.0], dtype='<f4').tobytes()
    (tmp_path / 'm.emb').write_bytes(payload)
    m = read_embeddings_bin(tmp_path / 'm.emb')
    assert list(m.ids) == [0]
    np.testing.assert_array_equal(m.data, [[0.0, 1.0]])
    assert m.data.dtype == np.float32


def test_truncated_and_trailing_binary(tmp_path):
    (tmp_path / 'short.emb').write_bytes(b'EMB1\x01\x00\x00')
    with pytest.raises(TruncatedFile):
        read_embeddings_bin(tmp_path / 'short.emb')
    payload = b'EMB1' + np.array([1, 1], dtype='<u4').tobytes() + np.array([2.0], dtype='<f4').tobytes()
    (tmp_path / 'missing.emb').write_bytes(payload[:-1])
    with pytest.raises(TruncatedFile):
        read_embeddings_bin(tmp_path / 'missing.emb')
    (tmp_path / 'long.emb').write_bytes(payload + b'\x00')
    with pytest.raises(TrailingBytes):
        read_embeddings_bin(tmp_path / 'long.emb')
    (tmp_path / 'bad.emb').write_bytes(b'EMB2' + payload[4:])
    with pytest.raises(BadMagic):
        read_embeddings_bin(tmp_path / 'bad.emb')


def test_binary_size(tmp_path):
    m = EmbeddingMatrix([0, 1], np.eye(2))
    write_embeddings_bin(m, tmp_path / 'eye.emb')
    assert (tmp_path / 'eye.emb').stat().st_size == 28
    assert len(embeddings_to_bytes(m)) == 28


def test_binary_needs_contiguous_ids(tmp_path):
    with pytest.raises(NonContiguousIds):
        write_embeddings_bin(EmbeddingMatrix([0, 2], np.eye(2)), tmp_path / 'x.emb')


def test_binary_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for trial in range(100):
        n, dim = rng.integers(1, 12, size=2)
        data = (rng.standard_normal((n, dim)) * 10.0 ** rng.integers(-5, 6)).astype(np.float32)
        m = EmbeddingMatrix(np.arange(n), data)
        write_embeddings_bin(m, tmp_path / 'r.emb')
        assert read_embeddings_bin(tmp_path / 'r.emb').equals(m)


def test_csv_and_binary_agree(tmp_path, random_matrix):
    write_embeddings_bin(random_matrix, tmp_path / 'm.emb')
    write_embeddings_csv(random_matrix, tmp_path / 'm.csv', comment='generated')
    from_bin = read_embeddings_bin(tmp_path / 'm.emb')
    from_csv = read_embeddings_csv(tmp_path / 'm.csv')
    np.testing.assert_array_equal(from_bin.ids, from_csv.ids)
    np.testing.assert_array_equal(from_bin.data, from_csv.data.astype(np.float32))


def test_dataframe_conversion(random_matrix):
    frame = embeddings_to_dataframe(random_matrix)
    assert list(frame.columns) == ['id', 'f0', 'f1', 'f2']
    assert dataframe_to_embeddings(frame).equals(random_matrix)


def test_read_labels(tmp_path):
    labels = read_labels(write_lines(tmp_path / 'l.csv', ['id,label', '0,0', '1,1', '2,1']))
    assert labels.classes == 2
    assert labels.labels == {0: 0, 1: 1, 2: 1}


def test_read_labels_errors(tmp_path):
    with pytest.raises(NegativeLabel):
        read_labels(write_lines(tmp_path / 'a.csv', ['id,label', '0,-1']))
    with pytest.raises(DuplicateId):
        read_labels(write_lines(tmp_path / 'b.csv', ['id,label', '0,0', '0,1']))
    with pytest.raises(TooFewClasses):
        read_labels(write_lines(tmp_path / 'c.csv', ['id,label', '0,0', '1,0']))


def test_labels_with_explicit_classes(tmp_path):
    labels = read_labels(write_lines(tmp_path / 'a.csv', ['id,label', '3,0', '5,0']), classes=4)
    assert labels.classes == 4
    assert list(labels.labels_for([5, 3])) == [0, 0]


def test_write_labels_round_trip(tmp_path):
    labels = LabelAssignment({2: 1, 0: 0, 1: 2}, 3)
    write_labels(labels, tmp_path / 'l.csv', comment='{}')
    assert read_labels(tmp_path / 'l.csv', classes=3) == labels


def test_read_predictions(tmp_path):
    p = read_predictions(write_lines(tmp_path / 'p.csv', ['id,p0,p1', '0,0.5,0.5', '1,1.0,0.0']))
    assert p.classes == 2
    np.testing.assert_array_equal(p.probs, [[0.5, 0.5], [1.0, 0.0]])


def test_prediction_rows_must_be_normalized(tmp_path):
    with pytest.raises(RowNotNormalized) as err:
        read_predictions(write_lines(tmp_path / 'p.csv', ['id,p0,p1', '0,0.9,0.2']))
    assert err.value.row == 1
    assert err.value.total == pytest.approx(1.1)
    with pytest.raises(NegativeProbability):
        PredictionMatrix([0], [[1.5, -0.5]])


def test_predictions_within_tolerance_are_renormalized(tmp_path):
    p = PredictionMatrix([0], [[0.500004, 0.5]])
    assert p.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_write_predictions(tmp_path):
    p = PredictionMatrix([3, 1], [[0.25, 0.75], [0.1, 0.9]])
    write_predictions(p, tmp_path / 'p.csv')
    frame = pd.read_csv(tmp_path / 'p.csv')
    assert list(frame.columns) == ['id', 'p0', 'p1']
    np.testing.assert_allclose(read_predictions(tmp_path / 'p.csv').probs, p.probs)
