"""
Seeded comparisons of selection methods and supervision policies on simulated data.

Every seed draws one training pool and one test set; all the methods, budgets and policies of that seed are trained
on them with the same trial seed, so results are paired by seed.
"""
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ssl_label_selection.cluster import CLUSTERERS, ClusterParams
from ssl_label_selection.curriculum import curriculum_order, random_order
from ssl_label_selection.errors import ConfigError, LabelSelectionError, TrialError
from ssl_label_selection.ingest import PathLike, embeddings_to_bytes, make_dir, write_frame, write_text
from ssl_label_selection.policy import PolicyTemplate, build_schedule
from ssl_label_selection.select import MODES, SelectionResult, select_balanced, select_by_clustering, select_random, \
    select_random_balanced
from ssl_label_selection.sslsim import BlobSpec, Dataset, SimConfig, gen_train_test, proxy_predictions, train

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['method', 'budget', 'policy', 'mean', 'std', 'delta_vs_random', 'win_rate']
PLOT_COLUMNS = ['method', 'policy', 'budget', 'mean', 'std']


@dataclass(frozen=True)
class MethodSpec:
    """
    A way of selecting the labelled set.

    :param method: ``cluster-select`` or ``random``
    :param mode: ``imbalanced`` or ``balanced``
    :param clusterer: the clustering algorithm, for cluster selection
    :param label: the name of the method in reports
    """

    method: str = 'cluster-select'
    mode: str = 'imbalanced'
    clusterer: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.method not in ('cluster-select', 'random'):
            raise ConfigError(f'unknown selection method {self.method!r}')
        if self.mode not in MODES:
            raise ConfigError(f'unknown selection mode {self.mode!r}')
        if self.method == 'cluster-select':
            if self.clusterer is None:
                object.__setattr__(self, 'clusterer', 'kmeans')
            if self.clusterer not in CLUSTERERS:
                raise ConfigError(f'unknown clusterer {self.clusterer!r}, expected one of {", ".join(CLUSTERERS)}')
        elif self.clusterer is not None:
            raise ConfigError('random selection takes no clusterer')

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = self.clusterer if self.method == 'cluster-select' else 'random'
        return base + ('-balanced' if self.mode == 'balanced' else '')

    def baseline(self) -> 'MethodSpec':
        """
        The random sampling method this method is compared with.
        """
        return MethodSpec('random', self.mode)


@dataclass(frozen=True)
class BenchConfig:
    """
    A comparison to run.

    :param blob_spec: the simulated data
    :param budgets: the labelled set sizes
    :param methods: the selection methods; the random baseline of every mode is added when missing
    :param policies: the supervision policies, applied to every budget
    :param sim: the training hyper-parameters; the trial seed replaces ``sim.seed``
    :param cluster: the clustering parameters
    :param seeds: the number of paired repetitions
    :param seed: the seed of the first repetition; repetition r uses ``seed + r``
    :param test_per_class: held-out points per class, ``blob_spec.per_class`` by default
    :param proxy_temperature: the temperature of the predictions curriculum policies are ranked with
    :param workers: the number of repetitions running at the same time
    """

    blob_spec: BlobSpec = field(default_factory=BlobSpec)
    budgets: Tuple[int, ...] = (4,)
    methods: Tuple[MethodSpec, ...] = (MethodSpec('cluster-select'), MethodSpec('random'))
    policies: Tuple[PolicyTemplate, ...] = (PolicyTemplate('naive'),)
    sim: SimConfig = field(default_factory=SimConfig)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    seeds: int = 3
    seed: int = 0
    test_per_class: Optional[int] = None
    proxy_temperature: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError(f'seeds must be at least 1, got {self.seeds}')
        if self.seed < 0:
            raise ConfigError('seed must be non-negative')
        if not self.budgets:
            raise ConfigError('budgets must not be empty')
        if any(b < 1 for b in self.budgets):
            raise ConfigError('budgets must be positive')
        if not self.methods:
            raise ConfigError('methods must not be empty')
        if not self.policies:
            raise ConfigError('policies must not be empty')
        if self.workers < 1:
            raise ConfigError('workers must be at least 1')
        if self.test_per_class is not None and self.test_per_class < 1:
            raise ConfigError('test_per_class must be at least 1')
        if not self.proxy_temperature > 0:
            raise ConfigError('proxy_temperature must be positive')
        for kind, entries in (('method', self.methods), ('policy', self.policies)):
            by_name = {}
            for entry in entries:
                if by_name.setdefault(entry.name, entry) != entry:
                    raise ConfigError(f'two different {kind} entries are both named {entry.name!r}')

    def all_methods(self) -> Tuple[MethodSpec, ...]:
        """
        The configured methods, followed by the missing random baselines.
        """
        methods = list(self.methods)
        names = {m.name for m in methods}
        for method in self.methods:
            baseline = method.baseline()
            if baseline.name not in names:
                methods.append(baseline)
                names.add(baseline.name)
        return tuple(methods)


@dataclass(frozen=True)
class TrialOutcome:
    method: str
    budget: int
    policy: str
    seed: int
    accuracy: float
    data_hash: str


@dataclass(frozen=True)
class Cell:
    """
    The aggregated results of one (method, budget, policy) combination.

    :param accuracies: test accuracy of every seed, in seed order
    :param mean: the mean accuracy
    :param std: the sample standard deviation of the accuracies, 0 for a single seed
    :param delta_vs_random: the mean paired difference with the random baseline
    :param win_rate: the fraction of seeds where the method is at least as accurate as the baseline
    """

    method: str
    budget: int
    policy: str
    baseline: str
    seeds: Tuple[int, ...]
    accuracies: Tuple[float, ...]
    mean: float
    std: float
    delta_vs_random: float
    win_rate: float


@dataclass(frozen=True)
class ComparisonReport:
    cells: Tuple[Cell, ...]
    trials: Tuple[TrialOutcome, ...] = ()
    data_hashes: Dict[int, str] = field(default_factory=dict)
    config: Optional[BenchConfig] = None

    def cell(self, method: str, budget: int, policy: str) -> Cell:
        for cell in self.cells:
            if (cell.method, cell.budget, cell.policy) == (method, budget, policy):
                return cell
        raise KeyError((method, budget, policy))

    def to_dict(self) -> Dict:
        return {
            'cells': [asdict(c) for c in self.cells],
            'trials': [asdict(t) for t in self.trials],
            'data_hashes': {str(k): v for k, v in self.data_hashes.items()},
            'config': asdict(self.config) if self.config is not None else None,
            'std_convention': 'sample standard deviation (ddof=1)',
            'curriculum_scores': 'entropy of soft k-means memberships of the pool (proxy predictions)',
        }

    def to_json(self, metadata: Optional[Dict] = None) -> str:
        payload = self.to_dict()
        if metadata is not None:
            payload['metadata'] = metadata
        return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def data_hash(train_set: Dataset, test_set: Dataset) -> str:
    """
    A 64-bit content hash of a training pool and a test set, points and labels.
    """
    digest = hashlib.blake2b(digest_size=8)
    for matrix, labels in (train_set, test_set):
        digest.update(embeddings_to_bytes(matrix))
        digest.update(np.asarray(labels.labels_for(matrix.ids), dtype='<i8').tobytes())
    return digest.hexdigest()


def make_selection(method: MethodSpec, train_set: Dataset, n: int, seed: int,
                   params: ClusterParams = None) -> SelectionResult:
    """
    Selects n samples of the pool with a method. Labels are only read by balanced modes and for class counts.
    """
    pool, labels = train_set
    if method.method == 'random':
        if method.mode == 'balanced':
            return select_random_balanced(labels, n, seed, pool)
        return select_random(pool.n, n, seed, pool.ids, labels)
    if method.mode == 'balanced':
        return select_balanced(pool, labels, n, method.clusterer, params, seed)
    return select_by_clustering(pool, n, method.clusterer, params, seed, labels)


def run_comparison(cfg: BenchConfig) -> ComparisonReport:
    """
    Runs every (method, budget, policy) combination on every seed and aggregates test accuracies.

    :param cfg: the comparison
    :return: one cell per combination, in configuration order, with the trials they were computed from
    """
    seeds = [cfg.seed + r for r in range(cfg.seeds)]
    logger.info('running %d seeds with %d workers', len(seeds), cfg.workers)
    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        per_seed = list(executor.map(lambda s: _run_seed(cfg, s), seeds))

    trials = tuple(t for outcomes in per_seed for t in outcomes)
    hashes = {outcomes[0].seed: outcomes[0].data_hash for outcomes in per_seed if outcomes}
    accuracy = {(t.method, t.budget, t.policy, t.seed): t.accuracy for t in trials}
    cells = []
    for method in cfg.all_methods():
        for budget in cfg.budgets:
            for policy in cfg.policies:
                values = np.array([accuracy[method.name, budget, policy.name, s] for s in seeds])
                baseline = np.array([accuracy[method.baseline().name, budget, policy.name, s] for s in seeds])
                cells.append(Cell(
                    method=method.name,
                    budget=budget,
                    policy=policy.name,
                    baseline=method.baseline().name,
                    seeds=tuple(seeds),
                    accuracies=tuple(float(v) for v in values),
                    mean=float(np.mean(values)),
                    std=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                    delta_vs_random=float(np.mean(values - baseline)),
                    win_rate=float(np.mean(values >= baseline)),
                ))
    return ComparisonReport(tuple(cells), trials, hashes, cfg)


def _run_seed(cfg: BenchConfig, seed: int) -> List[TrialOutcome]:
    train_set, test_set = gen_train_test(cfg.blob_spec, seed, cfg.test_per_class)
    fingerprint = data_hash(train_set, test_set)
    sim = replace(cfg.sim, seed=seed)
    predictions = None
    if any(p.curriculum for p in cfg.policies):
        predictions = proxy_predictions(train_set[0], cfg.blob_spec.classes, cfg.proxy_temperature, seed,
                                        cfg.cluster)
    outcomes = []
    for method in cfg.all_methods():
        try:
            for budget in cfg.budgets:
                selection = make_selection(method, train_set, budget, seed, cfg.cluster)
                for policy in cfg.policies:
                    if policy.curriculum:
                        ordering = curriculum_order(predictions, selection)
                    else:
                        ordering = random_order(selection, seed)
                    schedule = build_schedule(policy.realize(budget, sim.epochs))
                    report = train(train_set, test_set, ordering, schedule, sim)
                    outcomes.append(TrialOutcome(method.name, budget, policy.name, seed, report.test_accuracy,
                                                 fingerprint))
        except LabelSelectionError as err:
            raise TrialError(method.name, seed, err) from err
    logger.info('seed %d done: %d trials', seed, len(outcomes))
    return outcomes


def summarize(report: ComparisonReport) -> Tuple[str, pd.DataFrame]:
    """
    The report as a table: a data frame with full-precision values and an aligned text rendering with percentages
    at two decimals.

    :param report: the comparison report
    :return: the text table and the data frame
    """
    frame = pd.DataFrame(
        [[c.method, c.budget, c.policy, c.mean, c.std, c.delta_vs_random, c.win_rate] for c in report.cells],
        columns=REPORT_COLUMNS,
    )
    if frame.empty:
        return '  '.join(REPORT_COLUMNS) + '\n', frame
    text = frame.rename(columns={'mean': 'mean %', 'std': 'sample std %', 'delta_vs_random': 'delta %'})
    for column in ('mean %', 'sample std %', 'delta %'):
        text[column] = (100 * text[column]).map('{:.2f}'.format)
    text['win_rate'] = text['win_rate'].map('{:.2f}'.format)
    return text.to_string(index=False) + '\n', frame


def plot_series(report: ComparisonReport) -> pd.DataFrame:
    """
    Accuracy against budget, one series per (method, policy), ready for plotting.
    """
    frame = pd.DataFrame([[c.method, c.policy, c.budget, c.mean, c.std] for c in report.cells], columns=PLOT_COLUMNS)
    return frame.sort_values(['method', 'policy', 'budget'], kind='mergesort').reset_index(drop=True)


def write_report(report: ComparisonReport, out_dir: PathLike, metadata: Optional[Dict] = None,
                 plot_data: bool = False) -> List[Path]:
    """
    Writes ``report.csv``, ``report.txt`` and ``report.json`` (and ``plot_data.csv`` on request) to a directory.

    :param report: the comparison report
    :param out_dir: the destination directory, created when missing
    :param metadata: written as the first comment line of CSV files and as the ``metadata`` key of JSON
    :param plot_data: also write the accuracy-vs-budget series
    :return: the written files
    """
    out_dir = make_dir(out_dir)
    comment = json.dumps(metadata, sort_keys=True) if metadata is not None else None
    text, frame = summarize(report)
    written = [out_dir / 'report.csv', out_dir / 'report.txt', out_dir / 'report.json']
    write_frame(frame, written[0], comment)
    write_text(written[1], f'# {comment}\n' + text if comment is not None else text)
    write_text(written[2], report.to_json(metadata))
    if plot_data:
        written.append(out_dir / 'plot_data.csv')
        write_frame(plot_series(report), written[-1], comment)
    return written
