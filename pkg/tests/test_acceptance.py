"""
End-to-end properties on simulated data. The desk-scale comparisons take minutes and are marked slow.
"""
import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from ssl_label_selection.bench import BenchConfig, MethodSpec, run_comparison
from ssl_label_selection.cluster import clusterer_from_name, kmeans
from ssl_label_selection.ingest import EmbeddingMatrix
from ssl_label_selection.policy import PolicyTemplate
from ssl_label_selection.select import balanced_quotas, select_by_clustering
from ssl_label_selection.sslsim import BlobSpec, SimConfig, gen_blobs
from tests.utils import brute_force_nearest

FOUR_BLOBS = BlobSpec(classes=4, dim=2, per_class=50, spread=1.0, separation=10.0)
MIXTURE = BlobSpec(classes=8, dim=16, per_class=250, spread=1.0, separation=4.0)


@pytest.mark.parametrize('name', ['kmeans', 'bisecting'])
def test_clustering_recovers_four_blobs(name):
    recovered = 0
    for seed in range(10):
        m, labels = gen_blobs(FOUR_BLOBS, seed)
        model = clusterer_from_name(name).fit(m, 4, seed)
        history = np.array(model.wcss_history)
        assert np.all(np.diff(history) <= 1e-9 * history[:-1])
        recovered += adjusted_rand_score(labels.labels_for(m.ids), model.assignment) == 1.0
    assert recovered >= 9


def test_selection_oracle():
    rng = np.random.default_rng(50)
    for instance in range(50):
        n_points, dim = int(rng.integers(5, 40)), int(rng.integers(1, 5))
        n = int(rng.integers(1, n_points + 1))
        m = EmbeddingMatrix(np.arange(n_points), rng.standard_normal((n_points, dim)))
        selection = select_by_clustering(m, n, 'kmeans++', seed=instance)
        model = kmeans(m, n, init='plusplus', seed=instance)
        expected = sorted(brute_force_nearest(m.data, model.members(c), model.centroids[c]) for c in range(n))
        assert list(selection.indices) == expected
        assert selection.n == n
        quotas = balanced_quotas(n, int(rng.integers(1, n + 1)))
        assert sum(quotas) == n and max(quotas) - min(quotas) <= 1


def mixture_comparison(budgets, policies=(PolicyTemplate('naive'),)):
    return run_comparison(BenchConfig(
        blob_spec=MIXTURE,
        budgets=budgets,
        methods=(MethodSpec('cluster-select'),),
        policies=policies,
        sim=SimConfig(),
        seeds=20,
        workers=4,
    ))


@pytest.mark.slow
def test_cluster_selection_beats_random_at_one_label_per_class():
    cell = mixture_comparison((8,)).cell('kmeans', 8, 'naive')
    assert cell.delta_vs_random > 0
    assert cell.win_rate >= 0.7


@pytest.mark.slow
def test_gap_shrinks_with_budget():
    budgets = (8, 32, 200)
    report = mixture_comparison(budgets)
    cells = [report.cell('kmeans', budget, 'naive') for budget in budgets]
    inversions = [
        (later.delta_vs_random - earlier.delta_vs_random, later.std)
        for earlier, later in zip(cells, cells[1:]) if later.delta_vs_random > earlier.delta_vs_random
    ]
    assert len(inversions) <= 1
    assert all(rise <= std for rise, std in inversions)


@pytest.mark.slow
def test_incremental_policies_match_naive():
    policies = (
        PolicyTemplate('naive'), PolicyTemplate.from_panel('c'), PolicyTemplate.from_panel('c', curriculum=True)
    )
    report = mixture_comparison((32,), policies)
    naive = report.cell('kmeans', 32, 'naive').mean
    best = max(report.cell('kmeans', 32, policy.name).mean for policy in policies[1:])
    assert abs(best - naive) < 0.02
