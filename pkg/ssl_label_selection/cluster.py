"""
K-Means clustering of embedding matrices: Lloyd iterations with random or ++ seeding, best-of-restarts, and the
divisive Bisecting K-Means. Every tie (nearest centroid, farthest point, split target) goes to the lowest index,
so a clustering is a pure function of (matrix, k, init, params, seed).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from ssl_label_selection.errors import ConfigError, DimensionMismatch, KExceedsN, UnsplittableCluster
from ssl_label_selection.ingest import EmbeddingMatrix
from ssl_label_selection.seeding import derive_seed

logger = logging.getLogger(__name__)

INITS = ('random', 'plusplus')
PLUSPLUS_VARIANTS = ('greedy-farthest', 'd2-sampling')

Points = Union[EmbeddingMatrix, np.ndarray]


@dataclass(frozen=True)
class ClusterParams:
    """
    Settings shared by all the clustering algorithms.

    :param max_iters: maximum number of Lloyd iterations per run
    :param rel_tol: a run stops when the relative WCSS improvement of an iteration falls to this value or below
    :param restarts: number of independent runs; the one with the lowest WCSS is kept
    :param plusplus_variant: ``greedy-farthest`` picks each new ++ centroid as the point farthest from the chosen
                             ones, ``d2-sampling`` draws it with probability proportional to the squared distance
    """

    max_iters: int = 300
    rel_tol: float = 1e-6
    restarts: int = 10
    plusplus_variant: str = 'greedy-farthest'

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f'max_iters must be at least 1, got {self.max_iters}')
        if self.restarts < 1:
            raise ConfigError(f'restarts must be at least 1, got {self.restarts}')
        if self.rel_tol < 0:
            raise ConfigError(f'rel_tol must be non-negative, got {self.rel_tol}')
        if self.plusplus_variant not in PLUSPLUS_VARIANTS:
            raise ConfigError(f'plusplus_variant must be one of {PLUSPLUS_VARIANTS}, got {self.plusplus_variant}')


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """
    A finished clustering.

    :param centroids: k x D array of cluster centres
    :param assignment: the cluster index of each of the N points
    :param wcss: within-cluster sum of squared euclidean distances
    :param n_iter: Lloyd iterations of the retained run (number of bisections for Bisecting K-Means)
    :param wcss_history: WCSS after the initial assignment and after each iteration of the retained run
    :param restart_wcss: final WCSS of every restart, in restart order
    """

    centroids: np.ndarray
    assignment: np.ndarray
    wcss: float
    n_iter: int = 0
    wcss_history: Tuple[float, ...] = ()
    restart_wcss: Tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        """
        Positions of the points assigned to a cluster, in ascending order.
        """
        return np.flatnonzero(self.assignment == cluster)


def init_random(m: Points, k: int, seed: int) -> np.ndarray:
    """
    Chooses k distinct data points uniformly at random, as the initial centroids of naive K-Means.

    :param m: the points
    :param k: the number of centroids, 1 <= k <= N
    :param seed: the random seed
    :return: the positions of the chosen points, in draw order
    """
    points = _as_points(m)
    _check_k(k, len(points))
    return np.random.default_rng(seed).choice(len(points), size=k, replace=False)


def init_plusplus(m: Points, k: int, seed: int, variant: str = 'greedy-farthest') -> np.ndarray:
    """
    K-Means++ seeding. The first centroid is a uniformly drawn data point. With the ``greedy-farthest`` variant
    each next centroid is the point with the largest distance from all the centroids chosen so far (ties go to
    the lowest index); with ``d2-sampling`` it is drawn with probability proportional to its squared distance.

    :param m: the points
    :param k: the number of centroids, 1 <= k <= N
    :param seed: the random seed
    :param variant: ``greedy-farthest`` or ``d2-sampling``
    :return: the positions of the chosen points, in choice order
    """
    if variant not in PLUSPLUS_VARIANTS:
        raise ConfigError(f'unknown ++ variant {variant}')
    points = _as_points(m)
    n = len(points)
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    available = np.ones(n, dtype=bool)
    available[chosen[0]] = False
    min_d2 = _sq_distances(points, points[chosen[0]][np.newaxis])[:, 0]
    for _ in range(1, k):
        if variant == 'greedy-farthest':
            nxt = int(np.argmax(np.where(available, min_d2, -np.inf)))
        else:
            weights = np.where(available, min_d2, 0.0)
            total = weights.sum()
            if total > 0:
                nxt = int(rng.choice(n, p=weights / total))
            else:
                nxt = int(rng.choice(np.flatnonzero(available)))
        chosen.append(nxt)
        available[nxt] = False
        min_d2 = np.minimum(min_d2, _sq_distances(points, points[nxt][np.newaxis])[:, 0])
    return np.array(chosen, dtype=np.int64)


def wcss(m: Points, model: ClusterModel) -> float:
    """
    The within-cluster sum of squares of a model over a matrix: the sum over points of the squared euclidean
    distance to the assigned centroid.

    :param m: the points
    :param model: a clustering of those points
    :return: the WCSS
    """
    points = _as_points(m)
    if model.centroids.ndim != 2 or model.centroids.shape[1] != points.shape[1]:
        raise DimensionMismatch(f'centroids of shape {model.centroids.shape} for {points.shape[1]}-D points')
    if len(model.assignment) != len(points):
        raise DimensionMismatch(f'{len(model.assignment)} assignments for {len(points)} points')
    return _wcss(points, model.centroids, model.assignment)


class Clusterer(ABC):
    """
    A clustering algorithm producing :class:`ClusterModel` objects.

    :param init: ``random`` or ``plusplus`` seeding of the Lloyd runs
    :param params: the :class:`ClusterParams`
    """

    def __init__(self, init: str = 'random', params: ClusterParams = None):
        if init not in INITS:
            raise ConfigError(f'init must be one of {INITS}, got {init}')
        self.init = init
        self.params = params if params is not None else ClusterParams()

    @property
    @abstractmethod
    def name(self) -> str:
        """
        The name of the algorithm, as accepted by :func:`clusterer_from_name`.
        """
        pass

    @abstractmethod
    def fit(self, m: Points, k: int, seed: int) -> ClusterModel:
        """
        Partitions the points into k clusters.

        :param m: the points
        :param k: the number of clusters, 1 <= k <= N
        :param seed: the random seed
        :return: the finished model
        """
        pass


class KMeans(Clusterer):
    """
    Lloyd's K-Means. Each run alternates assignment to the nearest centroid and recomputation of the centroids as
    the mean of their members, until the relative WCSS improvement falls below ``rel_tol`` or ``max_iters`` is
    reached. An empty cluster is repaired by seizing the point farthest from its current centroid. Out of
    ``restarts`` runs, the one with the lowest WCSS is kept (the first one on ties).
    """

    @property
    def name(self) -> str:
        return 'kmeans++' if self.init == 'plusplus' else 'kmeans'

    def fit(self, m: Points, k: int, seed: int) -> ClusterModel:
        points = _as_points(m)
        _check_k(k, len(points))
        best = None
        restart_wcss = []
        for restart in range(self.params.restarts):
            run_seed = derive_seed(seed, restart)
            if self.init == 'plusplus':
                seeds = init_plusplus(points, k, run_seed, self.params.plusplus_variant)
            else:
                seeds = init_random(points, k, run_seed)
            model = _lloyd(points, points[seeds], self.params)
            restart_wcss.append(model.wcss)
            logger.debug('%s restart %d: wcss %.6g after %d iterations', self.name, restart, model.wcss,
                         model.n_iter)
            if best is None or model.wcss < best.wcss:
                best = model
        return ClusterModel(best.centroids, best.assignment, best.wcss, best.n_iter, best.wcss_history,
                            tuple(restart_wcss))


class BisectingKMeans(Clusterer):
    """
    Bisecting K-Means. Starting from a single cluster with all the points, the cluster with the largest WCSS
    contribution (among those with at least two points; ties go to the oldest) is split in two by
    :class:`KMeans` with k=2, until k clusters exist. Clusters are numbered in order of creation, a split
    retiring its parent. The finished model assigns every point to its nearest final centroid.
    """

    @property
    def name(self) -> str:
        return 'bisecting++' if self.init == 'plusplus' else 'bisecting'

    def fit(self, m: Points, k: int, seed: int) -> ClusterModel:
        points = _as_points(m)
        n = len(points)
        _check_k(k, n)
        splitter = KMeans(self.init, self.params)
        # (creation order, member positions, centroid, wcss contribution)
        clusters: List[Tuple[int, np.ndarray, np.ndarray, float]] = []
        everything = np.arange(n)
        centroid = _centroids_from(points, np.zeros(n, dtype=np.int64), 1)
        clusters.append((0, everything, centroid[0], _wcss(points, centroid, np.zeros(n, dtype=np.int64))))
        created = 1
        splits = 0
        while len(clusters) < k:
            splittable = [c for c in clusters if len(c[1]) > 1]
            if not splittable:
                raise UnsplittableCluster(len(clusters), k)
            target = max(splittable, key=lambda c: (c[3], -c[0]))
            halves = splitter.fit(points[target[1]], 2, derive_seed(seed, splits))
            splits += 1
            clusters.remove(target)
            for half in range(2):
                members = target[1][halves.assignment == half]
                contribution = _wcss(points[members], halves.centroids[half:half + 1],
                                     np.zeros(len(members), dtype=np.int64))
                clusters.append((created, members, halves.centroids[half], contribution))
                created += 1
            logger.debug('bisection %d split a cluster of %d points (wcss %.6g)', splits, len(target[1]), target[3])
        clusters.sort(key=lambda c: c[0])
        centroids = np.stack([c[2] for c in clusters])
        assignment, _, centroids, _ = _assign(points, centroids)
        return ClusterModel(centroids, assignment, _wcss(points, centroids, assignment), splits)


CLUSTERERS = {
    'kmeans': (KMeans, 'random'),
    'kmeans++': (KMeans, 'plusplus'),
    'bisecting': (BisectingKMeans, 'random'),
    'bisecting++': (BisectingKMeans, 'plusplus'),
}


def clusterer_from_name(name: str, params: ClusterParams = None) -> Clusterer:
    """
    Resolves ``kmeans``, ``kmeans++``, ``bisecting`` or ``bisecting++`` to a :class:`Clusterer`.
    """
    try:
        cls, init = CLUSTERERS[name]
    except KeyError:
        raise ConfigError(f'unknown clusterer {name}, expected one of {sorted(CLUSTERERS)}') from None
    return cls(init, params)


def kmeans(m: Points, k: int, init: str = 'random', params: ClusterParams = None, seed: int = 0) -> ClusterModel:
    """
    Best-of-restarts Lloyd K-Means, see :class:`KMeans`.
    """
    return KMeans(init, params).fit(m, k, seed)


def bisecting_kmeans(m: Points, k: int, init: str = 'random', params: ClusterParams = None,
                     seed: int = 0) -> ClusterModel:
    """
    Bisecting K-Means, see :class:`BisectingKMeans`.
    """
    return BisectingKMeans(init, params).fit(m, k, seed)


def _as_points(m: Points) -> np.ndarray:
    data = m.data if isinstance(m, EmbeddingMatrix) else m
    return np.asarray(data, dtype=np.float64)


def _check_k(k: int, n: int):
    if not 1 <= k <= n:
        raise KExceedsN(k, n)


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return cdist(points, centroids, 'sqeuclidean')


def _centroids_from(points: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    # np.add.at accumulates in ascending point order
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, assignment, points)
    counts = np.bincount(assignment, minlength=k)
    return sums / counts[:, np.newaxis]


def _wcss(points: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    residuals = points - centroids[assignment]
    return float(np.sum(np.einsum('ij,ij->i', residuals, residuals)))


def _assign(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """
    Nearest-centroid assignment, lowest cluster index on ties. Each empty cluster (ascending) seizes the point
    farthest from its current centroid, among clusters that keep at least one member, and moves onto it.
    """
    centroids = centroids.copy()
    distances = _sq_distances(points, centroids)
    assignment = distances.argmin(axis=1)
    d2 = distances[np.arange(len(points)), assignment]
    counts = np.bincount(assignment, minlength=len(centroids))
    repaired = False
    for empty in np.flatnonzero(counts == 0):
        donors = counts[assignment] > 1
        seized = int(np.argmax(np.where(donors, d2, -np.inf)))
        counts[assignment[seized]] -= 1
        counts[empty] = 1
        assignment[seized] = empty
        centroids[empty] = points[seized]
        d2[seized] = 0.0
        repaired = True
    return assignment, d2, centroids, repaired


def _lloyd(points: np.ndarray, centroids: np.ndarray, params: ClusterParams) -> ClusterModel:
    k = len(centroids)
    assignment, _, centroids, repaired = _assign(points, centroids)
    current = _wcss(points, centroids, assignment)
    history = [current]
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        centroids = _centroids_from(points, assignment, k)
        assignment, _, centroids, repaired = _assign(points, centroids)
        previous, current = current, _wcss(points, centroids, assignment)
        history.append(current)
        if not repaired and previous - current <= params.rel_tol * previous:
            break
    return ClusterModel(centroids, assignment, current, iterations, tuple(history))
