import numpy as np
import pytest

from ssl_label_selection.curriculum import random_order
from ssl_label_selection.errors import EpochOutOfRange, InvalidSpec, ScheduleExceedsSelection
from ssl_label_selection.policy import KINDS, PANELS, PolicySpec, PolicyTemplate, SupervisionSchedule, \
    active_count, active_prefix, build_schedule, preset_spec, read_schedule_csv, write_schedule_csv
from ssl_label_selection.select import SelectionResult
from tests.utils import check_exception_on_wrong_parameters, write_lines


def random_spec(rng):
    kind = KINDS[rng.integers(len(KINDS))]
    e = int(rng.integers(1, 60))
    n = int(rng.integers(0, 200))
    n0 = n if kind == 'naive' else int(rng.integers(0, n + 1))
    e0, ef = sorted(int(v) for v in rng.integers(0, e + 1, size=2))
    if kind == 'late-jump':
        ef = e0
    return PolicySpec(kind, n, e, n0=n0, e0=e0, ef=ef, m=int(rng.integers(1, 30)))


def test_naive():
    assert build_schedule(PolicySpec('naive', 40, 10)).counts == (40,) * 10


def test_linear():
    schedule = build_schedule(PolicySpec('linear', n=100, e=100, n0=10, e0=0, ef=90))
    assert active_count(schedule, 0) == 10
    assert active_count(schedule, 45) == 55
    assert schedule.counts[90:] == (100,) * 10


def test_linear_injects_when_labels_are_fewer_than_epochs():
    schedule = build_schedule(PolicySpec('linear', n=4, e=100))
    assert schedule.counts[0] == 0
    assert schedule.counts[25] == 1
    assert schedule.counts[99] == 3


def test_step():
    schedule = build_schedule(PolicySpec('step', n=100, e=100, m=25))
    assert set(schedule.counts) == {0, 25, 50, 75}
    changes = [epoch for epoch in range(1, 100) if schedule.counts[epoch] != schedule.counts[epoch - 1]]
    assert changes == [25, 50, 75]


def test_late_jump():
    schedule = build_schedule(PolicySpec('late-jump', n=40, e=100, n0=0, e0=50))
    assert active_count(schedule, 49) == 0
    assert active_count(schedule, 50) == 40


def test_late_linear():
    schedule = build_schedule(PolicySpec('late-linear', n=50, e=100, e0=25, ef=75))
    assert schedule.counts[:25] == (0,) * 25
    assert schedule.counts[50] == 25
    assert schedule.counts[75:] == (50,) * 25


def test_schedule_laws_on_random_specs():
    rng = np.random.default_rng(2021)
    for _ in range(1000):
        spec = random_spec(rng)
        counts = np.array(build_schedule(spec).counts)
        assert len(counts) == spec.e
        assert np.all(np.diff(counts) >= 0)
        assert np.all((counts >= spec.n0) & (counts <= spec.n))
        assert np.all(counts[:spec.e0] == spec.n0)
        assert np.all(counts[spec.ef:] == spec.n)
        if spec.kind == 'step':
            ramp = counts[spec.e0:spec.ef]
            assert np.all((ramp == spec.n) | ((ramp - spec.n0) % spec.m == 0))


def test_epoch_out_of_range():
    schedule = build_schedule(PolicySpec('naive', 5, 3))
    with pytest.raises(EpochOutOfRange):
        active_count(schedule, 3)
    with pytest.raises(EpochOutOfRange):
        active_count(schedule, -1)


def test_invalid_specs():
    check_exception_on_wrong_parameters(PolicySpec, {'kind': 'naive', 'n': 5, 'e': 3, 'n0': 2},
                                        {'kind': 'naive', 'n': 5, 'e': 3, 'n0': 5}, 'n0 must equal n')
    check_exception_on_wrong_parameters(PolicySpec, {'kind': 'late-jump', 'n': 5, 'e': 10, 'e0': 2, 'ef': 4},
                                        {'kind': 'late-jump', 'n': 5, 'e': 10, 'e0': 2}, 'ef must equal e0')
    check_exception_on_wrong_parameters(PolicySpec, {'kind': 'linear', 'n': 5, 'e': 10, 'n0': 6},
                                        {'kind': 'linear', 'n': 5, 'e': 10, 'n0': 5}, 'n0 must be in [0, n]')
    check_exception_on_wrong_parameters(PolicySpec, {'kind': 'linear', 'n': 5, 'e': 10, 'e0': 6, 'ef': 4},
                                        {'kind': 'linear', 'n': 5, 'e': 10, 'e0': 4, 'ef': 6}, 'e0 <= ef <= e')
    check_exception_on_wrong_parameters(PolicySpec, {'kind': 'step', 'n': 5, 'e': 10, 'm': 0},
                                        {'kind': 'step', 'n': 5, 'e': 10, 'm': 1}, 'm must be at least 1')
    with pytest.raises(InvalidSpec):
        PolicySpec('cosine', 5, 10)


def test_schedule_validation():
    with pytest.raises(InvalidSpec):
        SupervisionSchedule((3, 2))
    with pytest.raises(InvalidSpec):
        SupervisionSchedule((-1, 0))


def test_active_prefix():
    selection = SelectionResult(tuple(range(10)), 'random', 'imbalanced', 0)
    ordering = random_order(selection, seed=1)
    schedule = build_schedule(PolicySpec('linear', n=10, e=10))
    assert active_prefix(ordering, schedule, 0) == ()
    prefixes = [active_prefix(ordering, schedule, epoch) for epoch in range(10)]
    for earlier, later in zip(prefixes, prefixes[1:]):
        assert later[:len(earlier)] == earlier
    too_many = SupervisionSchedule((11,))
    with pytest.raises(ScheduleExceedsSelection):
        active_prefix(ordering, too_many, 0)


@pytest.mark.parametrize('panel', PANELS)
def test_panels_are_valid(panel):
    spec = preset_spec(panel, 40, 100)
    schedule = build_schedule(spec)
    assert schedule.counts[-1] == (39 if panel == 'b' else 40)
    assert PolicyTemplate.from_panel(panel).name == f'panel-{panel}'


def test_panel_shapes():
    assert set(build_schedule(preset_spec('a', 40, 100)).counts) == {40}
    assert build_schedule(preset_spec('c', 40, 100)).counts[0] == 10
    assert build_schedule(preset_spec('c', 40, 100)).counts[50] == 40
    assert set(build_schedule(preset_spec('d', 40, 100)).counts) == {0, 10, 20, 30, 40}
    late_jump = build_schedule(preset_spec('e', 40, 100)).counts
    assert late_jump[24] == 0 and late_jump[25] == 40
    assert preset_spec('f', 40, 100).e0 == 25 and preset_spec('f', 40, 100).ef == 75


def test_template_names():
    assert PolicyTemplate('linear', curriculum=True).name == 'linear+curriculum'
    assert PolicyTemplate.from_panel('b', curriculum=True).name == 'panel-b+curriculum'
    assert PolicyTemplate('step', label='chunks').name == 'chunks'
    with pytest.raises(InvalidSpec):
        PolicyTemplate.from_panel('g')
    with pytest.raises(InvalidSpec):
        PolicyTemplate('linear', e0_fraction=0.8, ef_fraction=0.5)


def test_schedule_csv(tmp_path):
    schedule = build_schedule(PolicySpec('step', n=12, e=8, m=3))
    write_schedule_csv(schedule, tmp_path / 's.csv', comment='{"seed": 0}')
    assert read_schedule_csv(tmp_path / 's.csv') == schedule


def test_bad_schedule_csv(tmp_path):
    with pytest.raises(InvalidSpec):
        read_schedule_csv(write_lines(tmp_path / 'a.csv', ['epoch,count', '1,4']))
    with pytest.raises(InvalidSpec):
        read_schedule_csv(write_lines(tmp_path / 'b.csv', ['epoch,count', '0,1.5']))
    with pytest.raises(InvalidSpec):
        read_schedule_csv(write_lines(tmp_path / 'c.csv', ['epoch,n', '0,1']))
