from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
import pytest

from ssl_label_selection.ingest import EmbeddingMatrix, LabelAssignment


def check_exception_on_wrong_parameters(
        spec_class: type,
        illegal_params: Dict,
        legal_params: Dict,
        message: str):
    with pytest.raises(ValueError) as err:
        spec_class(**illegal_params)
    assert message in err.value.args[0]
    spec_class(**legal_params)


def write_lines(path: Path, lines: Sequence[str]) -> Path:
    path.write_text('\n'.join(lines) + '\n')
    return path


def blobs(centers: np.ndarray, per_center: int, spread: float, seed: int) -> Tuple[EmbeddingMatrix, LabelAssignment]:
    """
    Gaussian blobs around the given centers, in blob order, with ids 0..N-1.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = np.repeat(np.arange(len(centers)), per_center)
    points = centers[labels] + spread * rng.standard_normal((len(labels), centers.shape[1]))
    ids = np.arange(len(labels))
    return EmbeddingMatrix(ids, points), LabelAssignment.from_arrays(ids, labels, max(2, len(centers)))


def brute_force_nearest(points: np.ndarray, members: np.ndarray, centroid: np.ndarray) -> int:
    best, best_d2 = None, None
    for position in members:
        d2 = float(np.sum((points[position] - centroid) ** 2))
        if best is None or d2 < best_d2:
            best, best_d2 = int(position), d2
    return best
