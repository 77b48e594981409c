"""
A desk-scale semi-supervised learner and the synthetic data it is trained on.

The classifier is a linear softmax model trained by minibatch SGD on a supervised cross-entropy plus a weighted
unsupervised term. Augmentations are additive isotropic gaussian noise, weak and strong differing only in the noise
scale. Gradients are analytic; pseudo-labels, confidence masks and the EMA teacher are treated as constants.
"""
import json
import logging
from dataclasses import asdict, dataclass, replace
from math import ceil
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import log_softmax, softmax

from ssl_label_selection.cluster import ClusterParams, kmeans
from ssl_label_selection.curriculum import OrderedSelection
from ssl_label_selection.errors import ConfigError, DimensionMismatch, EmptyUnlabelledBatch, NonFiniteValue, \
    ScheduleMismatch, TooFewClasses
from ssl_label_selection.ingest import EmbeddingMatrix, LabelAssignment, PredictionMatrix
from ssl_label_selection.policy import SupervisionSchedule, active_prefix
from ssl_label_selection.seeding import derive_seed, rng_from

logger = logging.getLogger(__name__)

UNSUP_MODES = ('fixmatch', 'pimodel', 'meanteacher', 'pseudolabel', 'none')
INIT_SCALE = 0.01

Dataset = Tuple[EmbeddingMatrix, LabelAssignment]


@dataclass(frozen=True)
class BlobSpec:
    """
    Isotropic gaussian blobs, one per class.

    :param classes: the number of classes, at least 2
    :param dim: the dimension of the points
    :param per_class: points per class
    :param spread: the standard deviation of every blob
    :param separation: the distance between neighbouring class means
    :param seed: the seed the class means are placed with
    """

    classes: int = 4
    dim: int = 2
    per_class: int = 50
    spread: float = 1.0
    separation: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError(f'blob_spec.classes must be at least 2, got {self.classes}')
        if self.dim < 1:
            raise ConfigError(f'blob_spec.dim must be at least 1, got {self.dim}')
        if self.per_class < 1:
            raise ConfigError(f'blob_spec.per_class must be at least 1, got {self.per_class}')
        if not self.spread > 0 or not self.separation > 0:
            raise ConfigError('blob_spec.spread and blob_spec.separation must be positive')
        if self.seed < 0:
            raise ConfigError('blob_spec.seed must be non-negative')


@dataclass(frozen=True)
class SimConfig:
    """
    The training hyper-parameters of a simulated trial.

    :param epochs: the number of epochs, one pass over the unlabelled pool each
    :param learning_rate: the SGD step size
    :param alpha: the weight of the unsupervised loss
    :param tau: the confidence a prediction needs to become a pseudo-label
    :param sigma_weak: the noise scale of weak augmentations
    :param sigma_strong: the noise scale of strong augmentations, at least sigma_weak
    :param unsup_mode: ``fixmatch``, ``pimodel``, ``meanteacher``, ``pseudolabel`` or ``none``
    :param ema_momentum: the momentum of the mean teacher
    :param batch_size: the labelled batch size
    :param weight_decay: the L2 penalty on the weights
    :param unlabelled_ratio: unlabelled batch size as a multiple of the labelled one
    :param seed: the trial seed: initialization, batches and augmentation noise
    """

    epochs: int = 30
    learning_rate: float = 0.03
    alpha: float = 1.0
    tau: float = 0.95
    sigma_weak: float = 0.1
    sigma_strong: float = 0.5
    unsup_mode: str = 'fixmatch'
    ema_momentum: float = 0.999
    batch_size: int = 64
    weight_decay: float = 5e-4
    unlabelled_ratio: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.unsup_mode not in UNSUP_MODES:
            raise ConfigError(f'sim.unsup_mode must be one of {", ".join(UNSUP_MODES)}, got {self.unsup_mode!r}')
        if self.epochs < 0:
            raise ConfigError('sim.epochs must be non-negative')
        if not self.learning_rate > 0:
            raise ConfigError('sim.learning_rate must be positive')
        if self.alpha < 0 or self.weight_decay < 0:
            raise ConfigError('sim.alpha and sim.weight_decay must be non-negative')
        if not 0 <= self.tau <= 1:
            raise ConfigError('sim.tau must be in [0, 1]')
        if not 0 <= self.sigma_weak <= self.sigma_strong:
            raise ConfigError('sim.sigma_weak must be non-negative and not larger than sim.sigma_strong')
        if not 0 < self.ema_momentum < 1:
            raise ConfigError('sim.ema_momentum must be in (0, 1)')
        if self.batch_size < 1 or self.unlabelled_ratio < 1:
            raise ConfigError('sim.batch_size and sim.unlabelled_ratio must be at least 1')
        if self.seed < 0:
            raise ConfigError('sim.seed must be non-negative')


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
    A multinomial logistic classifier, with the mean teacher copy of its parameters.

    :param weights: a classes x dim matrix
    :param biases: one bias per class
    :param ema_weights: the teacher weights
    :param ema_biases: the teacher biases
    """

    weights: np.ndarray
    biases: np.ndarray
    ema_weights: Optional[np.ndarray] = None
    ema_biases: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise NonFiniteValue()

    @classmethod
    def initial(cls, classes: int, dim: int, seed: int) -> 'ModelParams':
        rng = np.random.default_rng(seed)
        weights = INIT_SCALE * rng.standard_normal((classes, dim))
        biases = np.zeros(classes)
        return cls(weights, biases, weights.copy(), biases.copy())

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    def logits(self, x: np.ndarray, teacher: bool = False) -> np.ndarray:
        if teacher:
            return x @ self.ema_weights.T + self.ema_biases
        return x @ self.weights.T + self.biases

    def predict_proba(self, x: np.ndarray, teacher: bool = False) -> np.ndarray:
        return softmax(self.logits(x, teacher), axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def sgd_step(self, grad: 'ModelParams', learning_rate: float) -> 'ModelParams':
        return replace(self, weights=self.weights - learning_rate * grad.weights,
                       biases=self.biases - learning_rate * grad.biases)

    def ema_update(self, momentum: float) -> 'ModelParams':
        return replace(
            self,
            ema_weights=momentum * self.ema_weights + (1 - momentum) * self.weights,
            ema_biases=momentum * self.ema_biases + (1 - momentum) * self.biases,
        )


@dataclass(frozen=True)
class TrialReport:
    """
    The outcome of a simulated trial.

    :param test_accuracy: the fraction of held-out points classified correctly at the end of training
    :param train_accuracy: the same fraction over the whole training pool
    :param train_loss_curve: the mean loss of every epoch
    :param pseudo_label_rate_curve: per epoch, the fraction of unlabelled points whose confidence reached tau
    :param active_count_curve: per epoch, the number of labels in use
    :param config: the training hyper-parameters
    :param ranking: how the labels were ordered for injection
    """

    test_accuracy: float
    train_accuracy: float
    train_loss_curve: Tuple[float, ...]
    pseudo_label_rate_curve: Tuple[float, ...]
    active_count_curve: Tuple[int, ...]
    config: SimConfig
    ranking: str

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_dict(self) -> Dict:
        payload = asdict(self)
        for name in ('train_loss_curve', 'pseudo_label_rate_curve', 'active_count_curve'):
            payload[name] = list(payload[name])
        payload['seed'] = self.seed
        return payload

    def to_json(self, metadata: Optional[Dict] = None) -> str:
        payload = self.to_dict()
        if metadata is not None:
            payload['metadata'] = metadata
        return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def class_means(spec: BlobSpec) -> np.ndarray:
    """
    The class means of a blob spec, placed by ``spec.seed``. With no more classes than dimensions the means are
    the scaled vertices of a random orthonormal simplex, all at distance ``separation`` from each other; otherwise
    they lie on a regular polygon in a random plane, neighbours at distance ``separation``.
    """
    rng = rng_from(spec.seed)
    c, dim = spec.classes, spec.dim
    if c <= dim:
        basis, _ = np.linalg.qr(rng.standard_normal((dim, c)))
        return basis.T * spec.separation / np.sqrt(2)
    if dim == 1:
        return ((np.arange(c) - (c - 1) / 2) * spec.separation)[:, np.newaxis]
    radius = spec.separation / (2 * np.sin(np.pi / c))
    angles = 2 * np.pi * np.arange(c) / c
    polygon = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    plane, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
    return polygon @ plane.T


def gen_blobs(spec: BlobSpec, seed: int = 0, test: bool = False, per_class: Optional[int] = None) -> Dataset:
    """
    Draws gaussian blobs around the class means, in random order.

    :param spec: the blobs
    :param seed: the seed of the draw; the class means only depend on ``spec.seed``
    :param test: draw from the held-out stream rather than the training one
    :param per_class: overrides ``spec.per_class``
    :return: the points, with ids ``0..N-1``, and their labels
    """
    per_class = spec.per_class if per_class is None else per_class
    rng = rng_from(spec.seed, seed, 1 if test else 0)
    labels = np.repeat(np.arange(spec.classes), per_class)
    points = class_means(spec)[labels] + spec.spread * rng.standard_normal((labels.size, spec.dim))
    order = rng.permutation(labels.size)
    ids = np.arange(labels.size)
    return EmbeddingMatrix(ids, points[order]), LabelAssignment.from_arrays(ids, labels[order], spec.classes)


def gen_train_test(spec: BlobSpec, seed: int = 0, test_per_class: Optional[int] = None) -> Tuple[Dataset, Dataset]:
    """
    A training pool and a held-out test set drawn around the same class means.
    """
    return gen_blobs(spec, seed), gen_blobs(spec, seed, test=True, per_class=test_per_class)


def proxy_predictions(m: EmbeddingMatrix, k: int, temperature: float = 1.0, seed: int = 0,
                      params: ClusterParams = None) -> PredictionMatrix:
    """
    Soft cluster memberships, standing in for the predictions of a pre-trained model when ranking samples:
    each row is the softmax of the negative distances to the k-means++ centroids, divided by the temperature.

    :param m: the points
    :param k: the number of clusters, at least 2
    :param temperature: a positive temperature; lower is sharper
    :param seed: the clustering seed
    :param params: the clustering parameters
    :return: one probability row per point
    """
    if k < 2:
        raise TooFewClasses(k)
    if not temperature > 0:
        raise ConfigError('the proxy temperature must be positive')
    model = kmeans(m, k, init='plusplus', params=params, seed=seed)
    distances = np.sqrt(cdist(np.asarray(m.data, dtype=np.float64), model.centroids, 'sqeuclidean'))
    return PredictionMatrix(m.ids, softmax(-distances / temperature, axis=1))


def loss_and_grad(params: ModelParams, labelled: Tuple[np.ndarray, np.ndarray], unlabelled: np.ndarray,
                  cfg: SimConfig, seed: int) -> Tuple[float, ModelParams]:
    """
    The training loss of one step and its gradient with respect to weights and biases.

    The loss is the mean cross-entropy over the labelled batch, plus ``alpha`` times the mean unsupervised term over
    the unlabelled batch, plus ``weight_decay / 2`` times the squared norm of the weights. The unsupervised term is:

    * fixmatch: cross-entropy of the strongly augmented view against the argmax of the weakly augmented one,
      only where that argmax reached ``tau``
    * pimodel: squared distance between the outputs on two weakly augmented views
    * meanteacher: squared distance between the student on one view and the EMA teacher on another
    * pseudolabel: cross-entropy of the clean view against its own argmax, only where it reached ``tau``
    * none: nothing

    :param params: the model
    :param labelled: the labelled points and their labels; may be empty
    :param unlabelled: the unlabelled points
    :param cfg: the hyper-parameters
    :param seed: the seed of the augmentation noise
    :return: the loss and its gradient (teacher fields unset)
    """
    loss, grad, _ = _objective(params, labelled, unlabelled, cfg, seed)
    return loss, grad


def train(data: Dataset, test: Dataset, ordering: OrderedSelection, sched: SupervisionSchedule,
          cfg: SimConfig) -> TrialReport:
    """
    Trains a model from scratch, injecting labels in the given order according to the schedule.

    Each epoch visits the whole pool as unlabelled data, in batches of ``batch_size * unlabelled_ratio``; every
    step also draws a labelled batch of ``batch_size`` from the labels active at that epoch, with replacement when
    fewer than ``batch_size`` are active.

    :param data: the training pool and its labels (only labels of selected samples are used for training)
    :param test: the held-out set
    :param ordering: the injection order of the selected samples
    :param sched: the active labelled count of every epoch
    :param cfg: the hyper-parameters
    :return: accuracies and curves of the trial
    """
    pool, labels = data
    if sched.epochs != cfg.epochs:
        raise ScheduleMismatch(sched.epochs, cfg.epochs)
    if ordering.order and max(ordering.order) >= pool.n:
        raise DimensionMismatch(f'selected index {max(ordering.order)} outside a pool of {pool.n} samples')
    points = np.asarray(pool.data, dtype=np.float64)
    targets = np.full(pool.n, -1, dtype=np.int64)
    selected = np.array(ordering.order, dtype=np.int64)
    targets[selected] = labels.labels_for(pool.ids[selected])

    params = ModelParams.initial(labels.classes, pool.dim, derive_seed(cfg.seed, 0))
    batch_rng = rng_from(cfg.seed, 1)
    unlabelled_batch = cfg.batch_size * cfg.unlabelled_ratio
    steps = ceil(pool.n / unlabelled_batch)
    losses, rates, counts = [], [], []
    for epoch in range(cfg.epochs):
        active = np.array(active_prefix(ordering, sched, epoch), dtype=np.int64)
        permutation = batch_rng.permutation(pool.n)
        epoch_loss = epoch_rate = 0.0
        for step in range(steps):
            chunk = permutation[step * unlabelled_batch:(step + 1) * unlabelled_batch]
            if active.size:
                batch = batch_rng.choice(active, size=cfg.batch_size, replace=active.size < cfg.batch_size)
            else:
                batch = active
            loss, grad, rate = _objective(params, (points[batch], targets[batch]), points[chunk], cfg,
                                          derive_seed(cfg.seed, 2, epoch, step))
            params = params.sgd_step(grad, cfg.learning_rate)
            if cfg.unsup_mode == 'meanteacher':
                params = params.ema_update(cfg.ema_momentum)
            epoch_loss += loss
            epoch_rate += rate
        losses.append(epoch_loss / steps)
        rates.append(epoch_rate / steps)
        counts.append(active.size)
        logger.debug('epoch %d: %d labels, loss %.6g, pseudo-label rate %.3f', epoch, active.size, losses[-1],
                     rates[-1])

    report = TrialReport(
        test_accuracy=_accuracy(params, test),
        train_accuracy=_accuracy(params, data),
        train_loss_curve=tuple(losses),
        pseudo_label_rate_curve=tuple(rates),
        active_count_curve=tuple(counts),
        config=cfg,
        ranking=ordering.ranking,
    )
    logger.info('trial seed %d (%s, %d labels): test accuracy %.4f', cfg.seed, cfg.unsup_mode, len(ordering),
                report.test_accuracy)
    return report


def _accuracy(params: ModelParams, data: Dataset) -> float:
    matrix, labels = data
    known = np.array([int(i) in labels.labels for i in matrix.ids], dtype=bool)
    if not known.any():
        return 0.0
    predicted = params.predict(np.asarray(matrix.data, dtype=np.float64)[known])
    return float(np.mean(predicted == labels.labels_for(matrix.ids[known])))


def _one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    return np.eye(classes)[labels]


def _softmax_backward(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # vector-Jacobian product of softmax: J^T g = p * (g - <p, g>)
    return probs * (upstream - np.sum(probs * upstream, axis=1, keepdims=True))


def _masked_cross_entropy(params: ModelParams, x: np.ndarray, guesses: np.ndarray, tau: float, scale: int) \
        -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    mask = guesses.max(axis=1) >= tau
    pseudo_labels = guesses.argmax(axis=1)
    log_probs = log_softmax(params.logits(x), axis=1)
    term = -np.sum(log_probs[np.arange(len(x)), pseudo_labels] * mask) / scale
    delta = mask[:, np.newaxis] * (np.exp(log_probs) - _one_hot(pseudo_labels, params.classes)) / scale
    return term, delta.T @ x, delta.sum(axis=0), mask


def _objective(params: ModelParams, labelled: Tuple[np.ndarray, np.ndarray], unlabelled: np.ndarray,
               cfg: SimConfig, seed: int) -> Tuple[float, ModelParams, float]:
    """
    Loss, gradient and the fraction of unlabelled points whose confidence reached tau.
    """
    x_l, y_l = labelled
    x_u = np.asarray(unlabelled, dtype=np.float64)
    loss = 0.5 * cfg.weight_decay * float(np.sum(params.weights ** 2))
    grad_w = cfg.weight_decay * params.weights
    grad_b = np.zeros_like(params.biases)

    if len(y_l):
        log_probs = log_softmax(params.logits(x_l), axis=1)
        loss -= float(np.mean(log_probs[np.arange(len(y_l)), y_l]))
        delta = (np.exp(log_probs) - _one_hot(y_l, params.classes)) / len(y_l)
        grad_w = grad_w + delta.T @ x_l
        grad_b = grad_b + delta.sum(axis=0)

    mode = cfg.unsup_mode
    if len(x_u) == 0:
        if mode != 'none':
            raise EmptyUnlabelledBatch(mode)
        return loss, ModelParams(grad_w, grad_b), 0.0
    if mode == 'none' or cfg.alpha == 0:
        rate = float(np.mean(params.predict_proba(x_u).max(axis=1) >= cfg.tau))
        return loss, ModelParams(grad_w, grad_b), rate

    rng = np.random.default_rng(seed)
    n_u = len(x_u)
    if mode == 'fixmatch':
        weak = x_u + cfg.sigma_weak * rng.standard_normal(x_u.shape)
        strong = x_u + cfg.sigma_strong * rng.standard_normal(x_u.shape)
        term, unsup_w, unsup_b, mask = _masked_cross_entropy(params, strong, params.predict_proba(weak), cfg.tau,
                                                             n_u)
    elif mode == 'pseudolabel':
        term, unsup_w, unsup_b, mask = _masked_cross_entropy(params, x_u, params.predict_proba(x_u), cfg.tau, n_u)
    else:
        first = x_u + cfg.sigma_weak * rng.standard_normal(x_u.shape)
        second = x_u + cfg.sigma_weak * rng.standard_normal(x_u.shape)
        p_first = params.predict_proba(first)
        p_second = params.predict_proba(second, teacher=mode == 'meanteacher')
        difference = p_first - p_second
        term = float(np.sum(difference ** 2)) / n_u
        delta = _softmax_backward(p_first, 2 * difference / n_u)
        unsup_w, unsup_b = delta.T @ first, delta.sum(axis=0)
        if mode == 'pimodel':
            delta = _softmax_backward(p_second, -2 * difference / n_u)
            unsup_w, unsup_b = unsup_w + delta.T @ second, unsup_b + delta.sum(axis=0)
        mask = p_first.max(axis=1) >= cfg.tau

    loss += cfg.alpha * float(term)
    grad = ModelParams(grad_w + cfg.alpha * unsup_w, grad_b + cfg.alpha * unsup_b)
    return loss, grad, float(np.mean(mask))
