import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unifilter.errors import ConfigurationError, UnreachableTargetError
from unifilter.graph import homophily_ratio
from unifilter.synth import (
    CORA_CLASS_SIZES,
    CORA_EDGES,
    SWEEP_TARGETS,
    SynthSpec,
    cora_like_graph,
    make_synthetic,
    planted_partition_graph,
    random_onehot_features,
    random_regular_graph,
    reassign_to_target,
    reassignment_walk,
)


@pytest.fixture(scope="module")
def cora():
    return cora_like_graph(seed=0)


class TestOneHot:
    @given(st.integers(1, 200), st.integers(1, 50), st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_rows_are_one_hot(self, n, d, seed):
        x = random_onehot_features(n, d, seed)
        assert x.shape == (n, d)
        assert np.all(x.sum(axis=1) == 1)
        assert set(np.unique(x)) <= {0.0, 1.0}
        assert x.sum() == n

    def test_seeded(self):
        a = random_onehot_features(50, 10, 1)
        assert np.array_equal(a, random_onehot_features(50, 10, 1))
        assert not np.array_equal(a, random_onehot_features(50, 10, 2))

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            random_onehot_features(5, 0, 0)


class TestGenerators:
    def test_regular_graph(self):
        g = random_regular_graph(50, 6, seed=0)
        assert np.all(g.degrees == 6) and g.m == 150

    def test_regular_graph_impossible(self):
        with pytest.raises(ValueError):
            random_regular_graph(7, 3, seed=0)

    def test_planted_partition_connected(self):
        g, labels = planted_partition_graph([20, 30, 25], 300, 0.6, seed=2)
        assert g.m == 300 and g.n == 75
        assert np.bincount(labels).tolist() == [20, 30, 25]
        seen, frontier = {0}, [0]
        while frontier:
            frontier = [int(v) for u in frontier for v in g.neighbors(u) if int(v) not in seen]
            seen.update(frontier)
        assert len(seen) == g.n

    def test_cora_like_shape(self, cora):
        g, labels = cora
        assert g.n == sum(CORA_CLASS_SIZES) and g.m == CORA_EDGES
        assert abs(homophily_ratio(g, labels) - 0.81) < 0.02


class TestReassignment:
    @pytest.mark.parametrize("seed", range(5))
    def test_incremental_count_is_exact(self, seed):
        g, labels = planted_partition_graph([60, 70, 70], 600, 0.7, seed=seed)
        rng = np.random.default_rng(seed)
        labels = labels.copy()
        order = rng.permutation(g.n)
        draws = rng.integers(0, 3, size=g.n)
        u, v = g.edges()
        for step, node, old, same in reassignment_walk(g, labels, order, draws):
            assert same == np.count_nonzero(labels[u] == labels[v])
            assert same / g.m == homophily_ratio(g, labels)
        assert step == g.n

    def test_target_equal_to_base(self, cora):
        g, labels = cora
        h = homophily_ratio(g, labels)
        res = reassign_to_target(SynthSpec(g, labels, h, seed=0))
        assert res.n_reassigned == 0 and not res.exhausted
        assert np.array_equal(res.labels, labels)

    @pytest.mark.parametrize("target", SWEEP_TARGETS[1:-1])
    def test_sweep_targets_reachable(self, cora, target):
        g, labels = cora
        res = reassign_to_target(SynthSpec(g, labels, target, seed=1))
        assert abs(res.achieved_h - target) <= 0.02
        assert res.achieved_h == homophily_ratio(g, res.labels)
        assert not res.exhausted

    def test_lowest_target_exhausts(self, cora):
        g, labels = cora
        with pytest.warns(RuntimeWarning, match="exhausted"):
            res = reassign_to_target(SynthSpec(g, labels, SWEEP_TARGETS[0], seed=1))
        assert res.exhausted
        assert abs(res.achieved_h - SWEEP_TARGETS[0]) <= 0.02
        assert res.achieved_h == homophily_ratio(g, res.labels)

    def test_unreachable_reports_closest(self, cora):
        g, labels = cora
        with pytest.raises(UnreachableTargetError) as info:
            reassign_to_target(SynthSpec(g, labels, 0.02, seed=1))
        assert 0.1 < info.value.closest < 0.2

    def test_deterministic(self, cora):
        g, labels = cora
        a = reassign_to_target(SynthSpec(g, labels, 0.4, seed=7))
        b = reassign_to_target(SynthSpec(g, labels, 0.4, seed=7))
        assert np.array_equal(a.labels, b.labels) and a.achieved_h == b.achieved_h

    def test_base_labels_untouched(self, cora):
        g, labels = cora
        before = labels.copy()
        reassign_to_target(SynthSpec(g, labels, 0.5, seed=2))
        assert np.array_equal(labels, before)

    def test_spec_validation(self, cora):
        g, labels = cora
        with pytest.raises(ConfigurationError):
            SynthSpec(g, labels, 1.5)
        with pytest.raises(ConfigurationError):
            SynthSpec(g, labels[:10], 0.5)


class TestMakeSynthetic:
    def test_dataset(self, cora):
        g, labels = cora
        ds = make_synthetic(SynthSpec(g, labels, 0.3, feature_dim=100, seed=4))
        assert ds.features.shape == (g.n, 100)
        assert abs(ds.achieved_h - 0.3) <= 0.02
        assert ds.achieved_h == homophily_ratio(g, ds.split.labels)
        assert ds.split.n_classes == 7
        meta = ds.manifest()
        assert meta["achieved_h"] == ds.achieved_h and meta["n"] == g.n

    def test_deterministic(self, cora):
        g, labels = cora
        a = make_synthetic(SynthSpec(g, labels, 0.6, seed=9))
        b = make_synthetic(SynthSpec(g, labels, 0.6, seed=9))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.split.train, b.split.train)
        assert np.array_equal(a.split.labels, b.split.labels)

    def test_no_warning_for_regular_target(self, cora):
        g, labels = cora
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            make_synthetic(SynthSpec(g, labels, 0.5, seed=1))
