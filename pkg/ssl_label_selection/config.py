"""
YAML configuration documents for the ``simulate`` and ``bench`` commands.

Sections map one to one onto dataclasses; unknown keys, wrong types and invalid values raise
:class:`~errors.ConfigError` naming the offending key.
"""
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_type_hints

import yaml

from ssl_label_selection.bench import BenchConfig, MethodSpec
from ssl_label_selection.cluster import ClusterParams
from ssl_label_selection.errors import ConfigError, InvalidSpec
from ssl_label_selection.ingest import PathLike
from ssl_label_selection.policy import KINDS, PolicySpec, PolicyTemplate, preset_spec
from ssl_label_selection.sslsim import BlobSpec, SimConfig

logger = logging.getLogger(__name__)

POLICY_KEYS = ('panel', 'kind', 'n0', 'e0', 'ef', 'm')


@dataclass(frozen=True)
class TrialConfig:
    """
    A single simulated trial. Data, selection, ordering and schedule either come from files written by the other
    commands or are computed from the inline sections.

    :param sim: the training hyper-parameters
    :param cluster: the clustering parameters of inline selections and proxy predictions
    :param data_dir: a directory written by ``gen-data``
    :param blob_spec: inline simulated data, when there is no data directory
    :param test_per_class: held-out points per class of inline data
    :param selection: a selection JSON file
    :param select: an inline selection method, used with ``n``
    :param n: the size of an inline selection
    :param ordering: an ordering JSON file
    :param curriculum: rank inline orderings by entropy instead of randomly
    :param predictions: predictions to rank by; proxy predictions of the pool when missing
    :param schedule: a schedule CSV file
    :param policy: an inline policy, either ``{panel: <letter>}`` or explicit kind, n0, e0, ef and m
    :param proxy_temperature: the temperature of proxy predictions
    """

    sim: SimConfig = field(default_factory=SimConfig)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    data_dir: Optional[Path] = None
    blob_spec: Optional[BlobSpec] = None
    test_per_class: Optional[int] = None
    selection: Optional[Path] = None
    select: Optional[MethodSpec] = None
    n: Optional[int] = None
    ordering: Optional[Path] = None
    curriculum: bool = False
    predictions: Optional[Path] = None
    schedule: Optional[Path] = None
    policy: Optional[Dict[str, Any]] = None
    proxy_temperature: float = 1.0

    def __post_init__(self):
        if (self.data_dir is None) == (self.blob_spec is None):
            raise ConfigError('exactly one of data_dir and blob_spec must be given')
        if (self.selection is None) == (self.select is None):
            raise ConfigError('exactly one of selection and select must be given')
        if self.select is not None and (self.n is None or self.n < 1):
            raise ConfigError('an inline selection needs a positive n')
        if self.schedule is not None and self.policy is not None:
            raise ConfigError('schedule and policy are mutually exclusive')
        if self.ordering is not None and (self.curriculum or self.predictions is not None):
            raise ConfigError('ordering excludes curriculum and predictions')
        if not self.proxy_temperature > 0:
            raise ConfigError('proxy_temperature must be positive')

    def policy_spec(self, n: int) -> PolicySpec:
        """
        The inline policy for a selection of n samples (naive when no policy is given).
        """
        policy = dict(self.policy or {'kind': 'naive'})
        try:
            if 'panel' in policy:
                return preset_spec(policy['panel'], n, self.sim.epochs)
            return PolicySpec(n=n, e=self.sim.epochs, **policy)
        except InvalidSpec as err:
            raise ConfigError(f'policy: {err.reason}') from err


def load_yaml(path: PathLike) -> Dict:
    try:
        with open(path) as handle:
            document = yaml.safe_load(handle)
    except yaml.YAMLError as err:
        raise ConfigError(f'{path} is not valid YAML: {err}') from err
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError(f'{path} must contain a mapping')
    return document


def bench_config_from_dict(document: Dict) -> BenchConfig:
    """
    Builds a benchmark configuration. Budgets are given either as ``budgets`` (labelled counts) or as
    ``budgets_per_class`` (multiples of the number of classes). Policies are either ``{panel: <letter>}`` entries
    or policy templates; both accept ``curriculum`` and ``label``.
    """
    document = dict(document)
    _check_keys(document, {f.name for f in fields(BenchConfig)} | {'budgets_per_class'}, 'config')
    blob_spec = _build(BlobSpec, document.pop('blob_spec', None), 'blob_spec')
    values = {
        'blob_spec': blob_spec,
        'sim': _build(SimConfig, document.pop('sim', None), 'sim'),
        'cluster': _build(ClusterParams, document.pop('cluster', None), 'cluster'),
    }
    if 'budgets' in document and 'budgets_per_class' in document:
        raise ConfigError('give either budgets or budgets_per_class, not both')
    if 'budgets_per_class' in document:
        multiples = _int_list(document.pop('budgets_per_class'), 'budgets_per_class')
        values['budgets'] = tuple(k * blob_spec.classes for k in multiples)
    elif 'budgets' in document:
        values['budgets'] = tuple(_int_list(document.pop('budgets'), 'budgets'))
    if 'methods' in document:
        values['methods'] = tuple(
            _build(MethodSpec, entry, f'methods[{i}]') for i, entry in enumerate(_list(document.pop('methods'),
                                                                                       'methods'))
        )
    if 'policies' in document:
        values['policies'] = tuple(
            _policy_template(entry, f'policies[{i}]') for i, entry in enumerate(_list(document.pop('policies'),
                                                                                      'policies'))
        )
    hints = get_type_hints(BenchConfig)
    for key, value in document.items():
        values[key] = _coerce(value, hints[key], f'config.{key}')
    return BenchConfig(**values)


def load_bench_config(path: PathLike) -> BenchConfig:
    cfg = bench_config_from_dict(load_yaml(path))
    logger.info('loaded benchmark configuration from %s', path)
    return cfg


def trial_config_from_dict(document: Dict, base_dir: PathLike = '.') -> TrialConfig:
    """
    Builds a trial configuration. File paths are relative to ``base_dir``, usually the directory of the
    configuration file.
    """
    document = dict(document)
    _check_keys(document, {f.name for f in fields(TrialConfig)}, 'config')
    values = {
        'sim': _build(SimConfig, document.pop('sim', None), 'sim'),
        'cluster': _build(ClusterParams, document.pop('cluster', None), 'cluster'),
    }
    if 'blob_spec' in document:
        values['blob_spec'] = _build(BlobSpec, document.pop('blob_spec'), 'blob_spec')
    if 'select' in document:
        values['select'] = _build(MethodSpec, document.pop('select'), 'select')
    if 'policy' in document:
        policy = document.pop('policy')
        if not isinstance(policy, dict):
            raise ConfigError('policy must be a mapping')
        _check_keys(policy, set(POLICY_KEYS), 'policy')
        if 'panel' in policy and len(policy) > 1:
            raise ConfigError('policy: a panel takes no other key')
        if 'panel' not in policy and policy.get('kind') not in KINDS:
            raise ConfigError(f'policy.kind must be one of {", ".join(KINDS)}')
        values['policy'] = {
            key: _coerce(value, str if key in ('panel', 'kind') else int, f'policy.{key}')
            for key, value in policy.items()
        }
    for key in ('data_dir', 'selection', 'ordering', 'predictions', 'schedule'):
        if key in document:
            values[key] = Path(base_dir) / _coerce(document.pop(key), str, f'config.{key}')
    hints = get_type_hints(TrialConfig)
    for key, value in document.items():
        values[key] = _coerce(value, hints[key], f'config.{key}')
    return TrialConfig(**values)


def load_trial_config(path: PathLike) -> TrialConfig:
    return trial_config_from_dict(load_yaml(path), Path(path).parent)


def _policy_template(entry: Any, path: str) -> PolicyTemplate:
    if not isinstance(entry, dict):
        raise ConfigError(f'{path} must be a mapping')
    if 'panel' not in entry:
        return _build(PolicyTemplate, entry, path)
    _check_keys(entry, {'panel', 'curriculum', 'label'}, path)
    try:
        return PolicyTemplate.from_panel(
            _coerce(entry['panel'], str, f'{path}.panel'),
            curriculum=_coerce(entry.get('curriculum', False), bool, f'{path}.curriculum'),
            label=_coerce(entry.get('label'), Optional[str], f'{path}.label'),
        )
    except InvalidSpec as err:
        raise ConfigError(f'{path}: {err.reason}') from err


def _build(cls, section: Optional[Dict], path: str):
    """
    Instantiates a dataclass from a mapping, checking keys and scalar types.
    """
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError(f'{path} must be a mapping')
    _check_keys(section, {f.name for f in fields(cls)}, path)
    hints = get_type_hints(cls)
    values = {key: _coerce(value, hints[key], f'{path}.{key}') for key, value in section.items()}
    try:
        return cls(**values)
    except InvalidSpec as err:
        raise ConfigError(f'{path}: {err.reason}') from err


def _check_keys(section: Dict, known: set, path: str):
    unknown = sorted(str(k) for k in set(section) - known)
    if unknown:
        raise ConfigError(f'unknown key {path}.{unknown[0]}')


def _coerce(value: Any, hint: Any, path: str) -> Any:
    if getattr(hint, '__origin__', None) is Union:
        options = [a for a in hint.__args__ if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, options[0], path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f'{path} must be true or false')
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f'{path} must be an integer')
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f'{path} must be a number')
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f'{path} must be a string')
        return value
    raise ConfigError(f'{path} cannot be set here')


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(f'{path} must be a list')
    return value


def _int_list(value: Any, path: str) -> Tuple[int, ...]:
    return tuple(_coerce(v, int, f'{path}[{i}]') for i, v in enumerate(_list(value, path)))
