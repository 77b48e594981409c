"""
The ``ssl-label-selection`` command: one subcommand per pipeline stage, every stage reading and writing files.

Exit codes: 0 on success, 1 for invalid invocations, missing inputs and invalid configurations, 2 when a stage
fails on its inputs or cannot write its outputs. Every artifact records the tool version, the resolved flags and the
seed; config-driven commands also record the resolved configuration.
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional

from ssl_label_selection import __version__
from ssl_label_selection.bench import MethodSpec, make_selection, run_comparison, write_report
from ssl_label_selection.cluster import CLUSTERERS, PLUSPLUS_VARIANTS, ClusterParams
from ssl_label_selection.config import TrialConfig, load_bench_config, load_trial_config
from ssl_label_selection.curriculum import RANKINGS, OrderedSelection, curriculum_order, random_order
from ssl_label_selection.errors import ConfigError, LabelSelectionError
from ssl_label_selection.ingest import MAGIC, EmbeddingMatrix, read_embeddings_bin, read_embeddings_csv, \
    make_dir, read_labels, read_predictions, write_embeddings_bin, write_labels, write_text
from ssl_label_selection.policy import KINDS, PANELS, PolicySpec, build_schedule, preset_spec, read_schedule_csv, \
    write_schedule_csv
from ssl_label_selection.select import MODES, SelectionResult
from ssl_label_selection.sslsim import BlobSpec, TrialReport, gen_blobs, proxy_predictions, train

logger = logging.getLogger(__name__)

TOOL = 'ssl-label-selection'
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
DATA_FILES = {
    'train_embeddings': 'embeddings.emb',
    'train_labels': 'labels.csv',
    'test_embeddings': 'test_embeddings.emb',
    'test_labels': 'test_labels.csv',
}


class UsageError(Exception):
    """
    An invalid invocation: bad flags, missing input files, contract violations between flags.
    """


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def metadata(args: argparse.Namespace, config: Optional[Dict] = None, seed: Optional[int] = None) -> Dict:
    """
    The provenance record embedded in every artifact: tool, version, command, resolved flags and seed.

    :param args: the parsed command line
    :param config: the resolved configuration of config-driven commands
    :param seed: the seed of config-driven commands, which have no seed flag
    """
    flags = {
        key: str(value) if isinstance(value, Path) else value
        for key, value in sorted(vars(args).items()) if key not in ('handler', 'verbose', 'command')
    }
    info = {'tool': TOOL, 'version': __version__, 'command': args.command, 'flags': flags,
            'seed': flags.get('seed') if seed is None else seed}
    if config is not None:
        info['config'] = json.loads(json.dumps(config, default=str))
    return info


def gen_data(args: argparse.Namespace):
    spec = BlobSpec(args.classes, args.dim, args.per_class, args.spread, args.separation, args.seed)
    train_set = gen_blobs(spec, args.seed)
    test_set = gen_blobs(spec, args.seed, test=True, per_class=args.test_per_class)
    out = make_dir(args.out)
    info = metadata(args)
    comment = json.dumps(info, sort_keys=True)
    for (matrix, labels), prefix in ((train_set, 'train'), (test_set, 'test')):
        write_embeddings_bin(matrix, out / DATA_FILES[f'{prefix}_embeddings'])
        write_labels(labels, out / DATA_FILES[f'{prefix}_labels'], comment)
    info['blob_spec'] = asdict(spec)
    info['files'] = DATA_FILES
    write_text(out / 'metadata.json', json.dumps(info, indent=2, sort_keys=True) + '\n')


def select(args: argparse.Namespace):
    if args.mode == 'balanced' and args.labels is None:
        raise UsageError('--mode balanced needs ground-truth labels: pass --labels')
    if args.method == 'random' and args.clusterer is not None:
        raise UsageError('--clusterer only applies to --method cluster-select')
    pool = read_embeddings(_existing(args.embeddings, '--embeddings'))
    labels = read_labels(_existing(args.labels, '--labels')) if args.labels is not None else None
    method = MethodSpec(args.method, args.mode, args.clusterer)
    params = ClusterParams(args.max_iters, args.rel_tol, args.restarts, args.plusplus_variant)
    result = make_selection(method, (pool, labels), args.n, args.seed, params)
    write_text(args.out, result.to_json(metadata(args)))


def curriculum(args: argparse.Namespace):
    selection = read_selection(_existing(args.selection, '--selection'))
    if args.ranking == 'entropy-curriculum':
        if args.predictions is None:
            raise UsageError('--ranking entropy-curriculum needs --predictions')
        ordering = curriculum_order(read_predictions(_existing(args.predictions, '--predictions')), selection)
    else:
        ordering = random_order(selection, args.seed)
    write_text(args.out, ordering.to_json(metadata(args)))


def schedule(args: argparse.Namespace):
    if args.policy in PANELS:
        if (args.n0, args.e0, args.ef, args.m) != (None, 0, None, 1):
            raise UsageError('--n0/--e0/--ef/--m do not apply to a reference policy')
        spec = preset_spec(args.policy, args.n, args.epochs)
    else:
        spec = PolicySpec(args.policy, args.n, args.epochs, args.n0, args.e0, args.ef, args.m)
    write_schedule_csv(build_schedule(spec), args.out, json.dumps(metadata(args), sort_keys=True))


def simulate(args: argparse.Namespace):
    cfg = load_trial_config(_existing(args.config, '--config'))
    report = run_trial(cfg)
    write_text(args.out, report.to_json(metadata(args, asdict(cfg), cfg.sim.seed)))


def bench(args: argparse.Namespace):
    cfg = load_bench_config(_existing(args.config, '--config'))
    report = run_comparison(cfg)
    for path in write_report(report, args.out_dir, metadata(args, asdict(cfg), cfg.seed), args.plot_data):
        logger.info('wrote %s', path)


def run_trial(cfg: TrialConfig) -> TrialReport:
    """
    Resolves the data, selection, ordering and schedule of a trial configuration and trains.
    """
    if cfg.data_dir is not None:
        train_set = read_dataset(cfg.data_dir, 'train')
        test_set = read_dataset(cfg.data_dir, 'test', train_set[1].classes)
    else:
        train_set = gen_blobs(cfg.blob_spec, cfg.blob_spec.seed)
        test_set = gen_blobs(cfg.blob_spec, cfg.blob_spec.seed, test=True, per_class=cfg.test_per_class)
    seed = cfg.sim.seed

    if cfg.selection is not None:
        selection = read_selection(_existing(cfg.selection, 'selection'))
    else:
        selection = make_selection(cfg.select, train_set, cfg.n, seed, cfg.cluster)

    if cfg.ordering is not None:
        ordering = OrderedSelection.from_json(_existing(cfg.ordering, 'ordering').read_text(), selection)
    elif cfg.curriculum:
        if cfg.predictions is not None:
            predictions = read_predictions(_existing(cfg.predictions, 'predictions'))
        else:
            predictions = proxy_predictions(train_set[0], train_set[1].classes, cfg.proxy_temperature, seed,
                                            cfg.cluster)
        ordering = curriculum_order(predictions, selection)
    else:
        ordering = random_order(selection, seed)

    if cfg.schedule is not None:
        sched = read_schedule_csv(_existing(cfg.schedule, 'schedule'))
    else:
        sched = build_schedule(cfg.policy_spec(selection.n))
    return train(train_set, test_set, ordering, sched, cfg.sim)


def read_embeddings(path: Path) -> EmbeddingMatrix:
    """
    Reads an EMB1 file or, when the file does not start with the EMB1 magic, an embeddings CSV.
    """
    with open(path, 'rb') as handle:
        head = handle.read(len(MAGIC))
    return read_embeddings_bin(path) if head == MAGIC else read_embeddings_csv(path)


def read_dataset(data_dir: Path, prefix: str, classes: Optional[int] = None):
    """
    Reads one split of a ``gen-data`` directory.
    """
    matrix = read_embeddings(_existing(Path(data_dir) / DATA_FILES[f'{prefix}_embeddings'], 'data_dir'))
    labels = read_labels(_existing(Path(data_dir) / DATA_FILES[f'{prefix}_labels'], 'data_dir'), classes)
    return matrix, labels


def read_selection(path: Path) -> SelectionResult:
    try:
        return SelectionResult.from_json(path.read_text())
    except (ValueError, KeyError, TypeError) as err:
        if isinstance(err, LabelSelectionError):
            raise
        raise ConfigError(f'{path} is not a selection document: {err}') from err


def _existing(path, flag: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f'{flag}: no such file {path}')
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description='Labelled set selection and supervision policies for semi-supervised '
                                            'learning, with a desk-scale simulator.', allow_abbrev=False)
    parser.add_argument('--version', action='version', version=f'{TOOL} {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for details')
    commands = parser.add_subparsers(dest='command', metavar='command', parser_class=_Parser)
    commands.required = True
    defaults = argparse.ArgumentDefaultsHelpFormatter

    p = commands.add_parser('gen-data', help='draw gaussian blobs', formatter_class=defaults, allow_abbrev=False)
    p.add_argument('--classes', type=int, default=4, help='number of classes')
    p.add_argument('--dim', type=int, default=2, help='dimension of the points')
    p.add_argument('--per-class', type=int, default=50, help='training points per class')
    p.add_argument('--test-per-class', type=int, default=None, help='test points per class, --per-class if unset')
    p.add_argument('--spread', type=float, default=1.0, help='standard deviation of each blob')
    p.add_argument('--separation', type=float, default=10.0, help='distance between neighbouring class means')
    p.add_argument('--seed', type=_seed, default=0, help='random seed')
    p.add_argument('--out', required=True, help='output directory')
    p.set_defaults(handler=gen_data)

    p = commands.add_parser('select', help='select the samples to label', formatter_class=defaults,
                            allow_abbrev=False)
    p.add_argument('--embeddings', required=True, help='EMB1 or CSV embedding file')
    p.add_argument('--n', type=int, required=True, help='number of samples to select')
    p.add_argument('--method', choices=('cluster-select', 'random'), default='cluster-select', help='selection method')
    p.add_argument('--clusterer', choices=tuple(CLUSTERERS), default=None,
                   help='clustering algorithm (kmeans for cluster-select if unset)')
    p.add_argument('--mode', choices=MODES, default='imbalanced', help='balanced selection needs --labels')
    p.add_argument('--labels', default=None, help='id,label CSV, for balanced mode and class counts')
    p.add_argument('--restarts', type=int, default=10, help='k-means restarts')
    p.add_argument('--max-iters', type=int, default=300, help='Lloyd iterations per run')
    p.add_argument('--rel-tol', type=float, default=1e-6, help='relative WCSS improvement to stop at')
    p.add_argument('--plusplus-variant', choices=PLUSPLUS_VARIANTS, default='greedy-farthest',
                   help='how ++ seeding picks new centroids')
    p.add_argument('--seed', type=_seed, default=0, help='random seed')
    p.add_argument('--out', required=True, help='selection JSON file')
    p.set_defaults(handler=select)

    p = commands.add_parser('curriculum', help='order a selection for injection', formatter_class=defaults,
                            allow_abbrev=False)
    p.add_argument('--selection', required=True, help='selection JSON file')
    p.add_argument('--predictions', default=None, help='id,p0..p{c-1} CSV to rank by entropy')
    p.add_argument('--ranking', choices=RANKINGS, default='entropy-curriculum', help='ordering')
    p.add_argument('--seed', type=_seed, default=0, help='random seed of random orderings')
    p.add_argument('--out', required=True, help='ordering JSON file')
    p.set_defaults(handler=curriculum)

    p = commands.add_parser('schedule', help='build a supervision schedule', formatter_class=defaults,
                            allow_abbrev=False)
    p.add_argument('--policy', choices=KINDS + PANELS, required=True,
                   help='policy kind, or a reference policy letter a-f')
    p.add_argument('--n', type=int, required=True, help='labelled samples in the end')
    p.add_argument('--epochs', type=int, required=True, help='number of epochs')
    p.add_argument('--n0', type=int, default=None, help='labelled samples from the start (n for naive, else 0)')
    p.add_argument('--e0', type=int, default=0, help='first injection epoch')
    p.add_argument('--ef', type=int, default=None, help='epoch from which all labels are used (e0 for late-jump, '
                                                       'else epochs)')
    p.add_argument('--m', type=int, default=1, help='labels per step, for step policies')
    p.add_argument('--out', required=True, help='schedule CSV file')
    p.set_defaults(handler=schedule)

    p = commands.add_parser('simulate', help='train one simulated trial', formatter_class=defaults,
                            allow_abbrev=False)
    p.add_argument('--config', required=True, help='YAML trial configuration')
    p.add_argument('--out', required=True, help='trial report JSON file')
    p.set_defaults(handler=simulate)

    p = commands.add_parser('bench', help='compare methods and policies over paired seeds', formatter_class=defaults,
                            allow_abbrev=False)
    p.add_argument('--config', required=True, help='YAML benchmark configuration')
    p.add_argument('--out-dir', required=True, help='directory of report.csv, report.txt and report.json')
    p.add_argument('--plot-data', action='store_true', help='also write plot_data.csv')
    p.set_defaults(handler=bench)
    return parser


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError('seeds must be non-negative')
    return value


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f'{TOOL}: {err}', file=sys.stderr)
        return EXIT_USAGE
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')
    try:
        args.handler(args)
    except (UsageError, ConfigError) as err:
        print(f'{TOOL} {args.command}: {err}', file=sys.stderr)
        return EXIT_USAGE
    except LabelSelectionError as err:
        print(f'{TOOL} {args.command}: {err}', file=sys.stderr)
        return EXIT_FAILURE
    except OSError as err:
        print(f'{TOOL} {args.command}: {err}', file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK
