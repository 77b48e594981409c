import pytest

from ssl_label_selection.bench import MethodSpec
from ssl_label_selection.config import bench_config_from_dict, load_bench_config, load_trial_config, \
    trial_config_from_dict
from ssl_label_selection.errors import ConfigError
from ssl_label_selection.policy import PolicyTemplate
from tests.utils import write_lines


def test_bench_config():
    cfg = bench_config_from_dict({
        'blob_spec': {'classes': 10, 'dim': 16},
        'budgets_per_class': [1, 4],
        'methods': [{'clusterer': 'bisecting++', 'mode': 'balanced'}, {'method': 'random'}],
        'policies': [{'panel': 'c', 'curriculum': True}, {'kind': 'step', 'm_fraction': 0.25}],
        'sim': {'epochs': 5, 'unsup_mode': 'meanteacher'},
        'cluster': {'restarts': 2},
        'seeds': 2,
        'proxy_temperature': 2,
    })
    assert cfg.budgets == (10, 40)
    assert cfg.methods[0] == MethodSpec('cluster-select', 'balanced', 'bisecting++')
    assert cfg.policies[0].name == 'panel-c+curriculum'
    assert cfg.policies[1] == PolicyTemplate('step', m_fraction=0.25)
    assert cfg.sim.unsup_mode == 'meanteacher'
    assert cfg.cluster.restarts == 2
    assert cfg.proxy_temperature == 2.0


def test_empty_bench_config_uses_defaults():
    cfg = bench_config_from_dict({})
    assert cfg.seeds == 3
    assert cfg.budgets == (4,)


@pytest.mark.parametrize('document, message', [
    ({'sedes': 3}, 'unknown key config.sedes'),
    ({'sim': {'epoch': 3}}, 'unknown key sim.epoch'),
    ({'sim': {'epochs': 'many'}}, 'sim.epochs must be an integer'),
    ({'sim': {'tau': True}}, 'sim.tau must be a number'),
    ({'budgets': [4], 'budgets_per_class': [1]}, 'not both'),
    ({'budgets': 4}, 'budgets must be a list'),
    ({'policies': [{'panel': 'z'}]}, 'policies[0]'),
    ({'policies': [{'panel': 'a', 'm_fraction': 0.5}]}, 'unknown key policies[0].m_fraction'),
    ({'methods': [{'method': 'oracle'}]}, 'unknown selection method'),
])
def test_bench_config_errors(document, message):
    with pytest.raises(ConfigError) as err:
        bench_config_from_dict(document)
    assert message in str(err.value)


def test_trial_config(tmp_path):
    cfg = trial_config_from_dict({
        'data_dir': 'data',
        'select': {'clusterer': 'kmeans++'},
        'n': 8,
        'curriculum': True,
        'policy': {'kind': 'linear', 'n0': 2, 'ef': 10},
        'sim': {'epochs': 20},
    }, tmp_path)
    assert cfg.data_dir == tmp_path / 'data'
    assert cfg.select.clusterer == 'kmeans++'
    spec = cfg.policy_spec(8)
    assert (spec.kind, spec.n, spec.e, spec.n0, spec.ef) == ('linear', 8, 20, 2, 10)


def test_trial_config_with_panel():
    cfg = trial_config_from_dict({'blob_spec': {}, 'selection': 'sel.json', 'policy': {'panel': 'e'},
                                  'sim': {'epochs': 8}})
    spec = cfg.policy_spec(4)
    assert (spec.kind, spec.e0, spec.ef) == ('late-jump', 2, 2)


@pytest.mark.parametrize('document, message', [
    ({'selection': 's.json'}, 'exactly one of data_dir and blob_spec'),
    ({'blob_spec': {}}, 'exactly one of selection and select'),
    ({'blob_spec': {}, 'select': {}}, 'positive n'),
    ({'blob_spec': {}, 'selection': 's', 'schedule': 'c.csv', 'policy': {'kind': 'naive'}}, 'mutually exclusive'),
    ({'blob_spec': {}, 'selection': 's', 'ordering': 'o', 'curriculum': True}, 'ordering excludes'),
    ({'blob_spec': {}, 'selection': 's', 'policy': {'panel': 'a', 'kind': 'naive'}}, 'a panel takes no other key'),
    ({'blob_spec': {}, 'selection': 's', 'policy': {'kind': 'cosine'}}, 'policy.kind'),
])
def test_trial_config_errors(document, message):
    with pytest.raises(ConfigError) as err:
        trial_config_from_dict(document)
    assert message in str(err.value)


def test_invalid_inline_policy():
    cfg = trial_config_from_dict({'blob_spec': {}, 'selection': 's', 'policy': {'kind': 'linear', 'n0': 9}})
    with pytest.raises(ConfigError) as err:
        cfg.policy_spec(4)
    assert 'policy:' in str(err.value)


def test_load_yaml_files(tmp_path):
    bench = write_lines(tmp_path / 'bench.yaml', ['seeds: 1', 'budgets: [2, 3]'])
    assert load_bench_config(bench).budgets == (2, 3)
    trial = write_lines(tmp_path / 'trial.yaml', ['data_dir: data', 'selection: selection.json'])
    assert load_trial_config(trial).selection == tmp_path / 'selection.json'
    with pytest.raises(ConfigError):
        load_bench_config(write_lines(tmp_path / 'list.yaml', ['- 1', '- 2']))
    with pytest.raises(ConfigError):
        load_bench_config(write_lines(tmp_path / 'broken.yaml', ['seeds: [1']))
