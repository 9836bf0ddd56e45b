"""Sparse undirected graphs, degree-normalized propagation and homophily."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DimensionError

ISOLATED_POLICIES = ("zero", "self_loop")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph in CSR form.

    ``indptr``/``indices`` hold sorted, deduplicated neighbor lists with
    both directions of every edge present. Build instances through
    :meth:`from_edges`, which canonicalizes arbitrary edge input.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, src, dst, n=None) -> "Graph":
        """Symmetrize, drop self-loops and merge duplicate edges."""
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise DimensionError("edge endpoint arrays differ in length")
        if src.size and min(src.min(), dst.min()) < 0:
            raise ValueError("node indices must be nonnegative")
        n_min = int(max(src.max(), dst.max())) + 1 if src.size else 0
        n = n_min if n is None else max(int(n), n_min)

        keep = src != dst
        lo = np.minimum(src[keep], dst[keep])
        hi = np.maximum(src[keep], dst[keep])
        pairs = np.unique(lo * max(n, 1) + hi)
        lo, hi = np.divmod(pairs, max(n, 1))
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        adj.sort_indices()
        return cls(n=n, indptr=adj.indptr.astype(np.int64), indices=adj.indices.astype(np.int64))

    @property
    def m(self) -> int:
        return int(self.indices.size // 2)

    @property
    def degrees(self) -> np.ndarray:
        deg = self._cache.get("degrees")
        if deg is None:
            deg = np.diff(self.indptr)
            deg.setflags(write=False)
            self._cache["degrees"] = deg
        return deg

    @property
    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency matrix (shared, do not mutate)."""
        adj = self._cache.get("adjacency")
        if adj is None:
            data = np.ones(self.indices.size)
            adj = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
            self._cache["adjacency"] = adj
        return adj

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once, as ``(u, v)`` arrays with ``u < v``."""
        cached = self._cache.get("edges")
        if cached is None:
            rows = np.repeat(np.arange(self.n), self.degrees)
            upper = rows < self.indices
            cached = (rows[upper], self.indices[upper])
            self._cache["edges"] = cached
        return cached

    def laplacian(self, cfg: "PropagationConfig | None" = None) -> sp.csr_matrix:
        """Normalized Laplacian ``I - P`` for the given propagation config."""
        P = propagation_matrix(self, cfg or PropagationConfig())
        return (sp.identity(self.n, format="csr") - P).tocsr()

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class PropagationConfig:
    """How to build ``P = D^{-1/2} A D^{-1/2}``.

    ``self_loops`` switches to ``A + I`` and ``D + I``. Without self-loops,
    isolated nodes have no normalization; ``"zero"`` leaves their rows and
    columns of ``P`` empty, ``"self_loop"`` maps them to themselves.
    """

    self_loops: bool = False
    isolated_node_policy: str = "zero"

    def __post_init__(self):
        if self.isolated_node_policy not in ISOLATED_POLICIES:
            raise ConfigurationError(
                f"isolated_node_policy must be one of {ISOLATED_POLICIES}, "
                f"got {self.isolated_node_policy!r}"
            )


def propagation_matrix(g: Graph, cfg: PropagationConfig) -> sp.csr_matrix:
    key = ("P", cfg)
    P = g._cache.get(key)
    if P is not None:
        return P
    adj = g.adjacency
    deg = g.degrees.astype(np.float64)
    if cfg.self_loops:
        adj = adj + sp.identity(g.n, format="csr")
        deg = deg + 1.0
    elif cfg.isolated_node_policy == "self_loop":
        isolated = (deg == 0).astype(np.float64)
        adj = adj + sp.diags(isolated, format="csr")
        deg = deg + isolated
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    scale = sp.diags(inv_sqrt)
    P = (scale @ adj @ scale).tocsr()
    P.sort_indices()
    g._cache[key] = P
    return P


def propagate(g: Graph, cfg: PropagationConfig, x: np.ndarray) -> np.ndarray:
    """Apply ``P`` once to a signal vector or an ``n x d`` signal matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != g.n:
        raise DimensionError(f"signal has shape {x.shape}, graph has {g.n} nodes")
    return propagation_matrix(g, cfg) @ x


def _check_labels(g: Graph, labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise DimensionError(f"expected {g.n} labels, got shape {labels.shape}")
    return labels


def homophily_ratio(g: Graph, labels) -> float:
    """Fraction of edges whose endpoints share a label."""
    labels = _check_labels(g, labels)
    if g.m == 0:
        raise ValueError("homophily ratio is undefined on a graph without edges")
    u, v = g.edges()
    return float(np.count_nonzero(labels[u] == labels[v]) / g.m)


class HomophilyEstimate(NamedTuple):
    value: float
    n_edges: int
    fallback: bool


FALLBACK_HOMOPHILY = 0.5


def estimate_homophily(g: Graph, split: "LabeledSplit") -> HomophilyEstimate:
    """Homophily ratio over edges with both endpoints in the train set.

    Falls back to 0.5 (with a ``RuntimeWarning``) when the train set
    induces no edge.
    """
    labels = _check_labels(g, split.labels)
    if len(split.train) == 0:
        raise ValueError("train set is empty")
    in_train = np.zeros(g.n, dtype=bool)
    in_train[split.train] = True
    u, v = g.edges()
    both = in_train[u] & in_train[v]
    count = int(np.count_nonzero(both))
    if count == 0:
        warnings.warn(
            "no edge joins two training nodes; using fallback homophily 0.5",
            RuntimeWarning,
            stacklevel=2,
        )
        return HomophilyEstimate(FALLBACK_HOMOPHILY, 0, True)
    same = np.count_nonzero(labels[u[both]] == labels[v[both]])
    return HomophilyEstimate(same / count, count, False)


@dataclass(frozen=True, eq=False)
class LabeledSplit:
    """Node labels with disjoint train/validation/test node sets."""

    labels: np.ndarray
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        n = labels.size
        if n and labels.min() < 0:
            raise ValueError("labels must be nonnegative class indices")
        present = np.unique(labels)
        if present.size and present.size != present[-1] + 1:
            missing = sorted(set(range(int(present[-1]) + 1)) - set(present.tolist()))
            raise ValueError(f"classes {missing} never appear in labels")
        sets = []
        for name in ("train", "val", "test"):
            idx = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            if idx.size and (idx[0] < 0 or idx[-1] >= n):
                raise ValueError(f"{name} contains node indices outside [0, {n})")
            object.__setattr__(self, name, idx)
            sets.append(idx)
        total = sum(s.size for s in sets)
        if np.unique(np.concatenate(sets)).size != total:
            raise ValueError("train, val and test sets overlap")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, name: str) -> np.ndarray:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown subset {name!r}")
        return getattr(self, name)

    @classmethod
    def random(cls, labels, fractions=(0.6, 0.2, 0.2), seed=0) -> "LabeledSplit":
        """Random split; the test set takes whatever the first two leave."""
        labels = np.asarray(labels, dtype=np.int64)
        n = labels.size
        train_frac, val_frac = fractions[0], fractions[1]
        if train_frac < 0 or val_frac < 0 or train_frac + val_frac > 1 + 1e-12:
            raise ValueError(f"invalid split fractions {fractions}")
        perm = np.random.default_rng(seed).permutation(n)
        n_train = int(round(train_frac * n))
        n_val = int(round(val_frac * n))
        n_val = min(n_val, n - n_train)
        return cls(
            labels=labels,
            train=perm[:n_train],
            val=perm[n_train:n_train + n_val],
            test=perm[n_train + n_val:],
        )
