"""
Orderings of a labelled set: the order in which selected samples are injected into training.
"""
import json
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr

from ssl_label_selection.errors import DimensionMismatch, MissingPrediction, NegativeEntry, NotNormalized
from ssl_label_selection.ingest import NORMALIZATION_TOLERANCE, PredictionMatrix
from ssl_label_selection.select import SelectionResult

logger = logging.getLogger(__name__)

RANKINGS = ('entropy-curriculum', 'random')


@dataclass(frozen=True)
class OrderedSelection:
    """
    A labelled set together with its injection order. Injected sets are always prefixes of ``order``.

    :param base: the selection being ordered
    :param order: a permutation of ``base.indices``
    :param ranking: ``entropy-curriculum`` or ``random``
    :param scores: entropy (nats) of each sample along ``order``, for curriculum orderings
    """

    base: SelectionResult
    order: Tuple[int, ...]
    ranking: str
    scores: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != sorted(self.base.indices):
            raise DimensionMismatch('the ordering is not a permutation of the selected indices')
        if self.scores is not None:
            scores = tuple(float(s) for s in self.scores)
            if len(scores) != len(order):
                raise DimensionMismatch(f'{len(scores)} scores for {len(order)} ordered indices')
            object.__setattr__(self, 'scores', scores)
        object.__setattr__(self, 'order', order)

    def __len__(self):
        return len(self.order)

    def prefix(self, count: int) -> Tuple[int, ...]:
        return self.order[:count]

    def to_dict(self) -> Dict:
        payload = {'ranking': self.ranking, 'order': list(self.order)}
        if self.scores is not None:
            payload['scores'] = list(self.scores)
        return payload

    def to_json(self, metadata: Optional[Dict] = None) -> str:
        payload = self.to_dict()
        if metadata is not None:
            payload['metadata'] = metadata
        return json.dumps(payload, indent=2, sort_keys=True) + '\n'

    @classmethod
    def from_dict(cls, payload: Dict, base: SelectionResult) -> 'OrderedSelection':
        scores = payload.get('scores')
        return cls(base, tuple(payload['order']), payload['ranking'], tuple(scores) if scores is not None else None)

    @classmethod
    def from_json(cls, text: str, base: SelectionResult) -> 'OrderedSelection':
        """
        :param text: an ordering JSON document
        :param base: the selection the ordering refers to
        """
        return cls.from_dict(json.loads(text), base)


def entropy(p: Sequence[float]) -> float:
    """
    Shannon entropy of a probability vector, in nats, with ``0 ln 0 = 0``.

    :param p: the probability vector; entries must be non-negative and sum to 1 within 1e-5
    :return: the entropy
    """
    p = np.asarray(p, dtype=np.float64)
    negative = np.flatnonzero(p < 0)
    if negative.size:
        raise NegativeEntry(int(negative[0]))
    total = float(p.sum())
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise NotNormalized(total)
    return float(entr(p).sum())


def curriculum_order(preds: PredictionMatrix, sel: SelectionResult) -> OrderedSelection:
    """
    Orders the selected samples from easy to hard, that is by ascending entropy of their predictions.
    Predictions are matched to the selection by sample id. Ties are broken by ascending index.

    :param preds: class probabilities for (at least) every selected sample
    :param sel: the selection to order
    :return: the curriculum ordering, with the entropy of each sample
    """
    rows = preds.row_index()
    scores = np.empty(sel.n, dtype=np.float64)
    for position, (index, sample_id) in enumerate(zip(sel.indices, sel.ids)):
        row = rows.get(sample_id)
        if row is None:
            raise MissingPrediction(index)
        scores[position] = entropy(preds.probs[row])
    indices = np.array(sel.indices, dtype=np.int64)
    ranks = np.lexsort((indices, scores))
    if np.any(np.diff(scores[ranks]) < 0):
        raise RuntimeError('curriculum ordering is not sorted by entropy')
    logger.info('ranked %d samples, entropy from %.4g to %.4g nats', sel.n,
                scores[ranks[0]] if sel.n else 0.0, scores[ranks[-1]] if sel.n else 0.0)
    return OrderedSelection(sel, tuple(indices[ranks]), 'entropy-curriculum', tuple(scores[ranks]))


def random_order(sel: SelectionResult, seed: int = 0) -> OrderedSelection:
    """
    A uniformly random injection order, fixed by the seed.
    """
    permutation = np.random.default_rng(seed).permutation(sel.n)
    return OrderedSelection(sel, tuple(np.array(sel.indices, dtype=np.int64)[permutation]), 'random')
