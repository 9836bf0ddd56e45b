"""Synthetic graphs and the label-reassignment homophily sweep."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import networkx as nx
import numpy as np

from .errors import ConfigurationError, UnreachableTargetError
from .graph import Graph, LabeledSplit, homophily_ratio

# class sizes of the Cora citation graph (7 classes, 2708 nodes)
CORA_CLASS_SIZES = (351, 217, 418, 818, 426, 298, 180)
CORA_EDGES = 5429
SWEEP_TARGETS = (0.13, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.81)


def random_onehot_features(n: int, d: int, seed) -> np.ndarray:
    """``n x d`` matrix with a single 1 per row at a uniformly random column."""
    if d < 1:
        raise ValueError(f"feature dimension must be at least 1, got {d}")
    rng = np.random.default_rng(seed)
    x = np.zeros((n, d))
    x[np.arange(n), rng.integers(0, d, size=n)] = 1.0
    return x


def random_regular_graph(n: int, k: int, seed) -> Graph:
    """Random simple ``k``-regular graph on ``n`` nodes (pairing model)."""
    if (n * k) % 2 or not 0 <= k < n:
        raise ValueError(f"no simple {k}-regular graph on {n} nodes")
    G = nx.random_regular_graph(k, n, seed=int(np.random.default_rng(seed).integers(2**31)))
    e = np.asarray(G.edges(), dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(e[:, 0], e[:, 1], n=n)


def planted_partition_graph(class_sizes, n_edges: int, homophily: float, seed):
    """Connected graph with labels whose edge homophily is close to ``homophily``.

    A random recursive tree (each node attaches to an earlier one) keeps the
    graph connected, then extra edges are drawn until ``n_edges`` distinct
    edges exist. Every edge picks a uniform random endpoint and a partner of
    the same class with probability ``homophily``, otherwise of another
    class. Returns ``(graph, labels)``.
    """
    if not 0.0 <= homophily <= 1.0:
        raise ValueError(f"homophily must lie in [0, 1], got {homophily}")
    sizes = np.asarray(class_sizes, dtype=np.int64)
    if sizes.size < 2 or np.any(sizes < 2):
        raise ValueError("need at least two classes with two or more nodes each")
    rng = np.random.default_rng(seed)
    n = int(sizes.sum())
    if not n - 1 <= n_edges <= n * (n - 1) // 2:
        raise ValueError(f"cannot place {n_edges} edges on {n} connected nodes")
    labels = rng.permutation(np.repeat(np.arange(sizes.size), sizes))
    members = [np.flatnonzero(labels == c) for c in range(sizes.size)]
    order = rng.permutation(n)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    def partner(u, same, earlier_only):
        c = labels[u]
        for _ in range(64):
            if same:
                pool = members[c]
            else:
                other = rng.integers(sizes.size - 1)
                pool = members[other + (other >= c)]
            if earlier_only:
                pool = pool[rank[pool] < rank[u]]
                if pool.size == 0:
                    same = not same
                    continue
            v = pool[rng.integers(pool.size)]
            if v != u:
                return v
        return order[rng.integers(rank[u])] if earlier_only else None

    edges = set()
    for u in order[1:]:
        v = partner(u, rng.random() < homophily, True)
        edges.add((min(u, v), max(u, v)))
    while len(edges) < n_edges:
        u = int(rng.integers(n))
        v = partner(u, rng.random() < homophily, False)
        if v is not None:
            edges.add((min(u, v), max(u, v)))
    e = np.asarray(sorted(edges), dtype=np.int64)
    return Graph.from_edges(e[:, 0], e[:, 1], n=n), labels


def cora_like_graph(seed, homophily: float = 0.81):
    """Planted-partition stand-in with Cora's size, class sizes and homophily."""
    return planted_partition_graph(CORA_CLASS_SIZES, CORA_EDGES, homophily, seed)


@dataclass(frozen=True, eq=False)
class SynthSpec:
    base_graph: Graph
    base_labels: np.ndarray
    target_h: float
    feature_dim: int = 100
    seed: int = 0
    n_classes: int | None = None
    tol: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.target_h <= 1.0:
            raise ConfigurationError(f"target_h must lie in [0, 1], got {self.target_h}")
        labels = np.asarray(self.base_labels, dtype=np.int64)
        if labels.shape != (self.base_graph.n,):
            raise ConfigurationError("base_labels must give one class per node")
        object.__setattr__(self, "base_labels", labels)

    @property
    def classes(self) -> int:
        return self.n_classes or int(self.base_labels.max()) + 1


class Reassignment(NamedTuple):
    labels: np.ndarray
    achieved_h: float
    n_reassigned: int
    exhausted: bool


def reassignment_walk(g: Graph, labels: np.ndarray, order, draws):
    """Relabel ``order[i]`` to ``draws[i]`` in place, one node at a time.

    Yields ``(step, node, old_label, same)`` after every step, where
    ``same`` is the running count of same-label edges, updated from the
    node's neighborhood only.
    """
    u, v = g.edges()
    same = int(np.count_nonzero(labels[u] == labels[v]))
    for step, (node, new) in enumerate(zip(order, draws), start=1):
        old = labels[node]
        nbr_labels = labels[g.neighbors(node)]
        same += int(np.count_nonzero(nbr_labels == new) - np.count_nonzero(nbr_labels == old))
        labels[node] = new
        yield step, int(node), old, same


def reassign_to_target(spec: SynthSpec) -> Reassignment:
    """Walk a random node order, redrawing labels until ``target_h`` is crossed.

    Each visited node gets a class drawn uniformly from all classes (it may
    keep its own). At the first step where the running ratio crosses the
    target the closer of the two states is kept. If the whole permutation
    is walked without crossing, the closest state seen is kept when it is
    within ``spec.tol`` (``exhausted`` is then set and a warning issued);
    otherwise :class:`UnreachableTargetError` is raised.
    """
    g = spec.base_graph
    if g.m == 0:
        raise ConfigurationError("base graph has no edges")
    labels = spec.base_labels.copy()
    m = g.m
    target = spec.target_h
    h0 = homophily_ratio(g, labels)
    start_sign = np.sign(h0 - target)
    if start_sign == 0:
        return Reassignment(labels, h0, 0, False)

    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(g.n)
    draws = rng.integers(0, spec.classes, size=g.n)
    best = (abs(h0 - target), 0, h0)
    history = []
    prev_h = h0
    for step, node, old, same in reassignment_walk(g, labels, order, draws):
        history.append((node, old))
        h = same / m
        if abs(h - target) < best[0]:
            best = (abs(h - target), step, h)
        if np.sign(h - target) != start_sign:
            if abs(prev_h - target) < abs(h - target):
                labels[node] = old
                return Reassignment(labels, prev_h, step - 1, False)
            return Reassignment(labels, h, step, False)
        prev_h = h

    gap, step, achieved = best
    for node, old in reversed(history[step:]):
        labels[node] = old
    if gap > spec.tol:
        raise UnreachableTargetError(
            f"target homophily {target:.3f} not reachable; closest was {achieved:.4f}",
            closest=achieved,
        )
    warnings.warn(
        f"reassignment exhausted the permutation without crossing {target:.3f}; "
        f"closest reachable ratio is {achieved:.4f}",
        RuntimeWarning,
        stacklevel=2,
    )
    return Reassignment(labels, achieved, step, True)


@dataclass(eq=False)
class SyntheticDataset:
    graph: Graph
    features: np.ndarray
    split: LabeledSplit
    achieved_h: float
    target_h: float
    exhausted: bool
    seed: int

    def manifest(self) -> dict:
        return {
            "n": self.graph.n,
            "m": self.graph.m,
            "feature_dim": int(self.features.shape[1]),
            "n_classes": self.split.n_classes,
            "target_h": self.target_h,
            "achieved_h": self.achieved_h,
            "exhausted": self.exhausted,
            "seed": self.seed,
        }


def make_synthetic(spec: SynthSpec, fractions=(0.6, 0.2, 0.2)) -> SyntheticDataset:
    """Reassign labels toward ``spec.target_h`` and attach one-hot features and a split.

    Sub-seeds for labels, features and split are derived from ``spec.seed``
    so each stage can be reproduced on its own.
    """
    label_seed, feat_seed, split_seed = np.random.SeedSequence(spec.seed).spawn(3)
    sub = SynthSpec(
        spec.base_graph, spec.base_labels, spec.target_h, spec.feature_dim,
        int(label_seed.generate_state(1)[0]), spec.n_classes, spec.tol,
    )
    result = reassign_to_target(sub)
    # keep the class count fixed even if reassignment emptied a class
    labels = _compact_classes(result.labels, spec.classes)
    x = random_onehot_features(spec.base_graph.n, spec.feature_dim, feat_seed)
    split = LabeledSplit.random(labels, fractions, seed=split_seed)
    achieved = homophily_ratio(spec.base_graph, labels)
    return SyntheticDataset(
        spec.base_graph, x, split, achieved, spec.target_h, result.exhausted, spec.seed
    )


def _compact_classes(labels, n_classes):
    present = np.unique(labels)
    if present.size == n_classes:
        return labels
    remap = np.full(n_classes, -1, dtype=np.int64)
    remap[present] = np.arange(present.size)
    return remap[labels]
