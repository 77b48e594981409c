"""
Supervision policies: how many of the selected labels are visible to the learner at each epoch.

All the ramps multiply before they divide, so ``n0 + floor((n - n0) * i / (ef - e0))`` grows by the right amount even
when the labels to inject are fewer than the epochs of the injection window.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from math import floor
from typing import Dict, Optional, Tuple

import pandas as pd

from ssl_label_selection.curriculum import OrderedSelection
from ssl_label_selection.errors import EpochOutOfRange, InvalidSpec, ScheduleExceedsSelection
from ssl_label_selection.ingest import PathLike, read_table, write_frame

logger = logging.getLogger(__name__)

KINDS = ('naive', 'linear', 'step', 'late-jump', 'late-linear')
PANELS = ('a', 'b', 'c', 'd', 'e', 'f')


@dataclass(frozen=True)
class PolicySpec:
    """
    The parameters of a supervision policy.

    :param kind: ``naive``, ``linear``, ``step``, ``late-jump`` or ``late-linear``
    :param n: the number of labelled samples available in the end
    :param e: the number of epochs
    :param n0: the number of labelled samples from the start; defaults to n for naive policies, 0 otherwise
    :param e0: the epoch injection starts at
    :param ef: the epoch from which all n labels are used; defaults to e0 for late-jump policies, e otherwise
    :param m: the number of labels injected at once, for step policies
    """

    kind: str
    n: int
    e: int
    n0: Optional[int] = None
    e0: int = 0
    ef: Optional[int] = None
    m: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f'unknown policy kind {self.kind!r}, expected one of {", ".join(KINDS)}')
        if self.n0 is None:
            object.__setattr__(self, 'n0', self.n if self.kind == 'naive' else 0)
        if self.ef is None:
            object.__setattr__(self, 'ef', self.e0 if self.kind == 'late-jump' else self.e)
        if self.n < 0 or self.e < 0:
            raise InvalidSpec('n and e must be non-negative')
        if not 0 <= self.n0 <= self.n:
            raise InvalidSpec(f'n0 must be in [0, n], got n0={self.n0}, n={self.n}')
        if not 0 <= self.e0 <= self.ef <= self.e:
            raise InvalidSpec(f'epochs must satisfy 0 <= e0 <= ef <= e, got e0={self.e0}, ef={self.ef}, e={self.e}')
        if self.m < 1:
            raise InvalidSpec(f'm must be at least 1, got {self.m}')
        if self.kind == 'naive' and self.n0 != self.n:
            raise InvalidSpec('a naive policy uses all the labels from the start: n0 must equal n')
        if self.kind == 'late-jump' and self.ef != self.e0:
            raise InvalidSpec('a late-jump policy injects all the labels at once: ef must equal e0')

    def to_dict(self) -> Dict:
        return {'kind': self.kind, 'n': self.n, 'n0': self.n0, 'e': self.e, 'e0': self.e0, 'ef': self.ef, 'm': self.m}


class SupervisionPolicy(ABC):
    """
    A supervision policy: ``n0`` labels before ``e0``, all ``n`` labels from ``ef``, a policy-specific ramp in
    between. Counts are always clamped to ``[n0, n]``.

    :param spec: the policy parameters
    """

    name = None

    def __init__(self, spec: PolicySpec):
        self.spec = spec

    def count(self, epoch: int) -> int:
        """
        The number of labels in use at a given epoch

        :param epoch: the epoch, 0 <= epoch < e
        :return: the active labelled count
        """
        spec = self.spec
        if not 0 <= epoch < spec.e:
            raise EpochOutOfRange(epoch, spec.e)
        if epoch < spec.e0:
            return spec.n0
        if epoch >= spec.ef:
            return spec.n
        return min(spec.n, max(spec.n0, spec.n0 + self._increment(epoch - spec.e0)))

    @abstractmethod
    def _increment(self, i: int) -> int:
        """
        Labels added on top of n0 after i epochs of injection, for 0 <= i < ef - e0.
        """
        raise NotImplementedError

    def schedule(self) -> 'SupervisionSchedule':
        return SupervisionSchedule(tuple(self.count(epoch) for epoch in range(self.spec.e)), self.spec)


class NaivePolicy(SupervisionPolicy):
    """
    All the labels at every epoch.
    """
    name = 'naive'

    def _increment(self, i: int) -> int:
        return 0


class LinearPolicy(SupervisionPolicy):
    """
    Labels injected at a constant rate between e0 and ef.
    """
    name = 'linear'

    def _increment(self, i: int) -> int:
        spec = self.spec
        return ((spec.n - spec.n0) * i) // (spec.ef - spec.e0)


class StepPolicy(SupervisionPolicy):
    """
    Labels injected in chunks of m between e0 and ef.
    """
    name = 'step'

    def _increment(self, i: int) -> int:
        spec = self.spec
        return ((spec.n - spec.n0) * i) // ((spec.ef - spec.e0) * spec.m) * spec.m


class LateJumpPolicy(SupervisionPolicy):
    """
    n0 labels until e0, then all of them.
    """
    name = 'late-jump'

    def _increment(self, i: int) -> int:
        return self.spec.n - self.spec.n0


class LateLinearPolicy(LinearPolicy):
    """
    A linear ramp that starts after some epochs of training with n0 labels only.
    """
    name = 'late-linear'


POLICIES = {policy.name: policy for policy in (NaivePolicy, LinearPolicy, StepPolicy, LateJumpPolicy,
                                                LateLinearPolicy)}


@dataclass(frozen=True)
class SupervisionSchedule:
    """
    The active labelled count of every epoch.

    :param counts: ``counts[epoch]`` labels are in use at ``epoch``
    :param spec: the policy the schedule was built from, if known
    """

    counts: Tuple[int, ...]
    spec: Optional[PolicySpec] = field(default=None, compare=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise InvalidSpec('schedule counts must be non-negative')
        if any(later < earlier for earlier, later in zip(counts, counts[1:])):
            raise InvalidSpec('schedule counts must be non-decreasing')
        object.__setattr__(self, 'counts', counts)

    @property
    def epochs(self) -> int:
        return len(self.counts)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'epoch': range(self.epochs), 'count': self.counts})


def policy_from_spec(spec: PolicySpec) -> SupervisionPolicy:
    return POLICIES[spec.kind](spec)


def build_schedule(spec: PolicySpec) -> SupervisionSchedule:
    """
    Builds the per-epoch labelled counts of a policy.

    :param spec: the policy parameters
    :return: a schedule of length e
    """
    schedule = policy_from_spec(spec).schedule()
    logger.debug('%s schedule: %s', spec.kind, schedule.counts)
    return schedule


def active_count(s: SupervisionSchedule, epoch: int) -> int:
    if not 0 <= epoch < s.epochs:
        raise EpochOutOfRange(epoch, s.epochs)
    return s.counts[epoch]


def active_prefix(ordering: OrderedSelection, s: SupervisionSchedule, epoch: int) -> Tuple[int, ...]:
    """
    The labelled samples in use at an epoch: the first ``active_count(s, epoch)`` entries of the ordering.

    :param ordering: the injection order
    :param s: the schedule
    :param epoch: the epoch
    :return: the active indices, in injection order
    """
    count = active_count(s, epoch)
    if count > len(ordering):
        raise ScheduleExceedsSelection(count, len(ordering))
    return ordering.prefix(count)


@dataclass(frozen=True)
class PolicyTemplate:
    """
    A policy expressed in fractions of the budget and of the epochs, so that one template applies to every budget.

    :param kind: the policy kind
    :param n0_fraction: n0 as a fraction of n (ignored by naive policies)
    :param e0_fraction: e0 as a fraction of e
    :param ef_fraction: ef as a fraction of e (late-jump policies always use ef = e0)
    :param m_fraction: m as a fraction of n, at least one label
    :param curriculum: whether labels are injected easy first rather than in random order
    :param label: the name of the policy in reports
    """

    kind: str
    n0_fraction: float = 0.0
    e0_fraction: float = 0.0
    ef_fraction: float = 1.0
    m_fraction: float = 0.0
    curriculum: bool = False
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f'unknown policy kind {self.kind!r}, expected one of {", ".join(KINDS)}')
        for name in ('n0_fraction', 'e0_fraction', 'ef_fraction', 'm_fraction'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec(f'{name} must be in [0, 1]')
        if self.kind != 'late-jump' and self.e0_fraction > self.ef_fraction:
            raise InvalidSpec('e0_fraction must not exceed ef_fraction')

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        return self.kind + ('+curriculum' if self.curriculum else '')

    def realize(self, n: int, epochs: int) -> PolicySpec:
        """
        The policy for a given budget and number of epochs.
        """
        e0 = floor(self.e0_fraction * epochs)
        return PolicySpec(
            kind=self.kind,
            n=n,
            e=epochs,
            n0=n if self.kind == 'naive' else floor(self.n0_fraction * n),
            e0=e0,
            ef=e0 if self.kind == 'late-jump' else max(e0, floor(self.ef_fraction * epochs)),
            m=max(1, floor(self.m_fraction * n)),
        )

    @classmethod
    def from_panel(cls, panel: str, curriculum: bool = False, label: Optional[str] = None) -> 'PolicyTemplate':
        """
        The template of one of the reference policies:

        * ``a``: naive
        * ``b``: linear from no labels at the first epoch, complete when training ends
        * ``c``: linear from a quarter of the labels, complete at half of the training
        * ``d``: steps of a quarter of the labels, complete at three quarters of the training
        * ``e``: no labels for the first quarter of the training, then all of them
        * ``f``: no labels for the first quarter of the training, then linear until three quarters

        :param panel: the policy letter
        :param curriculum: whether labels are injected easy first
        :param label: the name in reports, ``panel-<letter>`` by default
        """
        try:
            kind, fractions = _PANEL_TEMPLATES[panel]
        except KeyError:
            raise InvalidSpec(f'unknown policy panel {panel!r}, expected one of {", ".join(PANELS)}') from None
        name = label or f'panel-{panel}' + ('+curriculum' if curriculum else '')
        return cls(kind, curriculum=curriculum, label=name, **fractions)


_PANEL_TEMPLATES = {
    'a': ('naive', {}),
    'b': ('linear', {'ef_fraction': 1.0}),
    'c': ('linear', {'n0_fraction': 0.25, 'ef_fraction': 0.5}),
    'd': ('step', {'ef_fraction': 0.75, 'm_fraction': 0.25}),
    'e': ('late-jump', {'e0_fraction': 0.25}),
    'f': ('late-linear', {'e0_fraction': 0.25, 'ef_fraction': 0.75}),
}


def preset_spec(panel: str, n: int, epochs: int) -> PolicySpec:
    """
    The reference policy of a panel letter (see :meth:`PolicyTemplate.from_panel`) for a budget and a number of
    epochs.
    """
    return PolicyTemplate.from_panel(panel).realize(n, epochs)


def write_schedule_csv(s: SupervisionSchedule, path: PathLike, comment: Optional[str] = None):
    write_frame(s.to_frame(), path, comment)


def read_schedule_csv(path: PathLike) -> SupervisionSchedule:
    """
    Reads an ``epoch,count`` schedule CSV. Epochs must be listed in order from 0.
    """
    header, body = read_table(path)
    if header != ['epoch', 'count']:
        raise InvalidSpec(f'schedule header must be epoch,count, got {",".join(header)}')
    values = body.apply(pd.to_numeric, errors='coerce')
    if values.isna().any().any() or (values % 1 != 0).any().any():
        raise InvalidSpec('schedule entries must be integers')
    epochs = values[0].astype(int).tolist()
    if epochs != list(range(len(epochs))):
        raise InvalidSpec('schedule epochs must be 0, 1, 2, ... in order')
    return SupervisionSchedule(tuple(values[1].astype(int)))
