"""
Labelled set selection: which n samples of an unlabelled pool get annotated.

Cluster selection partitions the embeddings into n clusters and picks, from each cluster, the member nearest to
its centroid. The balanced mode applies the same strategy within every class, with quotas that differ by at most
one sample. Random sampling is the baseline.
"""
import json
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ssl_label_selection.cluster import ClusterModel, ClusterParams, clusterer_from_name
from ssl_label_selection.errors import ClassTooSmall, DimensionMismatch, NExceedsPopulation, NLessThanClassCount
from ssl_label_selection.ingest import EmbeddingMatrix, LabelAssignment
from ssl_label_selection.seeding import derive_seed

logger = logging.getLogger(__name__)

METHODS = ('cluster-select', 'random')
MODES = ('imbalanced', 'balanced')
SELECTION_NOTES = {
    'nearest_search': 'restricted to cluster members',
    'distance': 'euclidean',
    'tie_break': 'lowest index',
    'balanced_quota': 'floor(n/c), one extra for the first n mod c classes',
}


@dataclass(frozen=True)
class SelectionResult:
    """
    A labelled set: positions of the selected samples in the source matrix, in ascending order.

    :param indices: the selected positions
    :param method: ``cluster-select`` or ``random``
    :param mode: ``imbalanced`` or ``balanced``
    :param seed: the seed the selection was made with
    :param clusterer: the clustering algorithm, for cluster selection
    :param ids: the sample ids at the selected positions (the positions themselves when omitted)
    :param per_class_counts: number of selected samples per class, when labels were available
    """

    indices: Tuple[int, ...]
    method: str
    mode: str
    seed: int
    clusterer: Optional[str] = None
    ids: Optional[Tuple[int, ...]] = None
    per_class_counts: Optional[Dict[int, int]] = None

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise DimensionMismatch('selected indices are not distinct')
        ids = indices if self.ids is None else tuple(int(i) for i in self.ids)
        if len(ids) != len(indices):
            raise DimensionMismatch(f'{len(ids)} ids for {len(indices)} selected indices')
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'ids', ids)

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def missing_classes(self) -> Tuple[int, ...]:
        """
        Classes without any selected sample, when class counts are known.
        """
        if self.per_class_counts is None:
            return ()
        return tuple(label for label, count in sorted(self.per_class_counts.items()) if count == 0)

    def to_dict(self) -> Dict:
        """
        :return: all the fields in a JSON-friendly dictionary
        """
        payload = asdict(self)
        payload['indices'] = list(self.indices)
        payload['ids'] = list(self.ids)
        if self.per_class_counts is None:
            del payload['per_class_counts']
        else:
            payload['per_class_counts'] = {str(k): v for k, v in sorted(self.per_class_counts.items())}
        payload['notes'] = SELECTION_NOTES
        return payload

    @classmethod
    def from_dict(cls, payload: Dict) -> 'SelectionResult':
        counts = payload.get('per_class_counts')
        return cls(
            indices=tuple(payload['indices']),
            method=payload['method'],
            mode=payload['mode'],
            seed=int(payload['seed']),
            clusterer=payload.get('clusterer'),
            ids=tuple(payload['ids']) if 'ids' in payload else None,
            per_class_counts={int(k): int(v) for k, v in counts.items()} if counts is not None else None,
        )

    def to_json(self, metadata: Optional[Dict] = None) -> str:
        payload = self.to_dict()
        if metadata is not None:
            payload['metadata'] = metadata
        return json.dumps(payload, indent=2, sort_keys=True) + '\n'

    @classmethod
    def from_json(cls, text: str) -> 'SelectionResult':
        return cls.from_dict(json.loads(text))


def balanced_quotas(n: int, classes: int) -> List[int]:
    """
    Per-class quotas of a balanced selection: ``floor(n / classes)`` each, plus one for the first
    ``n mod classes`` classes in ascending class order.
    """
    base, extra = divmod(n, classes)
    return [base + (1 if label < extra else 0) for label in range(classes)]


def nearest_members(m: EmbeddingMatrix, model: ClusterModel) -> np.ndarray:
    """
    For each cluster, the member with the smallest euclidean distance to the cluster centroid (the lowest position
    on ties).

    :param m: the clustered points
    :param model: the clustering
    :return: one position per cluster, in cluster order
    """
    points = np.asarray(m.data, dtype=np.float64)
    picks = np.empty(model.k, dtype=np.int64)
    for cluster in range(model.k):
        members = model.members(cluster)
        residuals = points[members] - model.centroids[cluster]
        picks[cluster] = members[np.argmin(np.einsum('ij,ij->i', residuals, residuals))]
    return picks


def select_by_clustering(m: EmbeddingMatrix, n: int, clusterer: str = 'kmeans', params: ClusterParams = None,
                         seed: int = 0, labels: Optional[LabelAssignment] = None) -> SelectionResult:
    """
    Clusters the matrix into n clusters and selects the member nearest to each centroid.

    :param m: the unlabelled pool
    :param n: the number of samples to select, 1 <= n <= N
    :param clusterer: ``kmeans``, ``kmeans++``, ``bisecting`` or ``bisecting++``
    :param params: the clustering parameters
    :param seed: the random seed
    :param labels: optional ground truth, only used to report per-class counts
    :return: the selection, in imbalanced mode
    """
    if not 1 <= n <= m.n:
        raise NExceedsPopulation(n, m.n)
    model = clusterer_from_name(clusterer, params).fit(m, n, seed)
    picks = np.sort(nearest_members(m, model))
    logger.info('selected %d of %d samples with %s (wcss %.6g)', n, m.n, clusterer, model.wcss)
    return SelectionResult(
        indices=tuple(picks),
        method='cluster-select',
        mode='imbalanced',
        seed=seed,
        clusterer=clusterer,
        ids=tuple(m.ids[picks]),
        per_class_counts=_count_classes(m.ids[picks], labels),
    )


def select_balanced(m: EmbeddingMatrix, labels: LabelAssignment, n: int, clusterer: str = 'kmeans',
                    params: ClusterParams = None, seed: int = 0) -> SelectionResult:
    """
    Cluster selection applied within every class, with quotas from :func:`balanced_quotas`. This is a study mode:
    it needs the ground-truth labels of the whole pool. Samples without a label are never selected.

    :param m: the pool
    :param labels: the ground-truth labels
    :param n: the total number of samples, at least the number of classes
    :param clusterer: the clustering algorithm
    :param params: the clustering parameters
    :param seed: the random seed; each class uses a seed derived from it
    :return: the union of the per-class selections
    """
    positions = _class_positions(m.ids, labels)
    quotas = _checked_quotas(n, labels.classes, positions)
    picks = []
    for label, (members, quota) in enumerate(zip(positions, quotas)):
        chosen = select_by_clustering(m.subset(members), quota, clusterer, params, derive_seed(seed, label))
        picks.extend(members[list(chosen.indices)])
    picks = np.sort(np.array(picks, dtype=np.int64))
    return SelectionResult(
        indices=tuple(picks),
        method='cluster-select',
        mode='balanced',
        seed=seed,
        clusterer=clusterer,
        ids=tuple(m.ids[picks]),
        per_class_counts=dict(enumerate(quotas)),
    )


def select_random(population: int, n: int, seed: int = 0, ids: Optional[Sequence[int]] = None,
                  labels: Optional[LabelAssignment] = None) -> SelectionResult:
    """
    Uniform sampling of n out of ``population`` positions, without replacement.

    :param population: the pool size
    :param n: the number of samples, 0 <= n <= population
    :param seed: the random seed
    :param ids: optional sample ids of the pool positions
    :param labels: optional ground truth, only used to report per-class counts
    :return: the selection, in imbalanced mode
    """
    if not 0 <= n <= population:
        raise NExceedsPopulation(n, population)
    picks = np.sort(np.random.default_rng(seed).choice(population, size=n, replace=False))
    pool_ids = np.arange(population) if ids is None else np.asarray(ids, dtype=np.int64)
    return SelectionResult(
        indices=tuple(picks),
        method='random',
        mode='imbalanced',
        seed=seed,
        ids=tuple(pool_ids[picks]),
        per_class_counts=_count_classes(pool_ids[picks], labels),
    )


def select_random_balanced(labels: LabelAssignment, n: int, seed: int = 0,
                           m: Optional[EmbeddingMatrix] = None) -> SelectionResult:
    """
    Uniform sampling within every class, with the quotas of :func:`balanced_quotas`.

    :param labels: the ground-truth labels
    :param n: the total number of samples
    :param seed: the random seed; each class uses a seed derived from it
    :param m: the pool the indices refer to; when omitted, indices are the labelled sample ids in ascending order
    :return: the selection, in balanced mode
    """
    pool_ids = m.ids if m is not None else np.array(sorted(labels.labels), dtype=np.int64)
    positions = _class_positions(pool_ids, labels)
    quotas = _checked_quotas(n, labels.classes, positions)
    picks = []
    for label, (members, quota) in enumerate(zip(positions, quotas)):
        rng = np.random.default_rng(derive_seed(seed, label))
        picks.extend(members[rng.choice(len(members), size=quota, replace=False)])
    picks = np.sort(np.array(picks, dtype=np.int64))
    indices = picks if m is not None else pool_ids[picks]
    return SelectionResult(
        indices=tuple(indices),
        method='random',
        mode='balanced',
        seed=seed,
        ids=tuple(pool_ids[picks]),
        per_class_counts=dict(enumerate(quotas)),
    )


def _class_positions(ids: np.ndarray, labels: LabelAssignment) -> List[np.ndarray]:
    by_class = [[] for _ in range(labels.classes)]
    for position, sample_id in enumerate(ids):
        label = labels.labels.get(int(sample_id))
        if label is not None:
            by_class[label].append(position)
    return [np.array(members, dtype=np.int64) for members in by_class]


def _checked_quotas(n: int, classes: int, positions: List[np.ndarray]) -> List[int]:
    if n < classes:
        raise NLessThanClassCount(n, classes)
    quotas = balanced_quotas(n, classes)
    for label, (members, quota) in enumerate(zip(positions, quotas)):
        if quota > len(members):
            raise ClassTooSmall(label, quota, len(members))
    return quotas


def _count_classes(ids: np.ndarray, labels: Optional[LabelAssignment]) -> Optional[Dict[int, int]]:
    if labels is None:
        return None
    counts = np.bincount(labels.labels_for(ids), minlength=labels.classes)
    return {label: int(count) for label, count in enumerate(counts)}
